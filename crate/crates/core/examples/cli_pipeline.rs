//! Drive the whole command-line pipeline in a temporary directory: synthesize
//! a world, build the KB, align, mask, train, probe and report.
//!
//! ```bash
//! cargo run --release --example cli_pipeline
//! ```
//!
//! Each step is the same as running the `detmask` binary with those
//! arguments. Every output gets a `<name>.manifest.json` next to it.

use detmask::cli::execute;

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    std::env::set_current_dir(dir.path())?;
    let steps: &[&[&str]] = &[
        &["synth", "--out", "world", "--seed", "5", "--paragraphs", "300"],
        &[
            "build-kb", "--triplets", "world/kb/triplets.tsv", "--entities", "world/kb/entities.tsv",
            "--predicates", "world/kb/predicates.tsv", "--out", "kb",
        ],
        &["align", "--kb", "kb", "--corpus", "world/corpus.jsonl", "--out", "samples.jsonl", "--ssm", "ssm.jsonl"],
        &["stats", "--samples", "samples.jsonl"],
        &[
            "mask", "--samples", "samples.jsonl", "--scheme", "deterministic", "--objective", "con-cls",
            "--out", "masked.jsonl", "--vocab-out", "vocab.txt", "--max-len", "40",
        ],
        &[
            "train", "--masked", "masked.jsonl", "--vocab", "vocab.txt", "--out", "model.ckpt",
            "--steps", "500", "--max-len", "40", "--log", "train.jsonl",
        ],
        &[
            "probe", "--model", "model.ckpt", "--templates", "world/templates.jsonl", "--facts",
            "world/facts.jsonl", "--samples", "samples.jsonl", "--out", "report.json",
        ],
        &["report", "report.json"],
    ];
    for args in steps {
        println!("$ detmask {}", args.join(" "));
        let code = execute(std::iter::once("detmask").chain(args.iter().copied()));
        anyhow::ensure!(code == 0, "{} exited with {code}", args[0]);
    }
    println!("\n{}", std::fs::read_to_string("model.ckpt.manifest.json")?);
    Ok(())
}
