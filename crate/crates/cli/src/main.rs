mod args;
mod commands;
mod output;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;

use args::Cli;
use commands::Usage;
use output::Meta;

const EXIT_USAGE: u8 = 2;
const EXIT_FAILURE: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<erw_core::Error>() {
        Some(
            erw_core::Error::NonConvergence(_)
            | erw_core::Error::DomainBreach(_)
            | erw_core::Error::NotDifferentiable(_),
        ) => EXIT_FAILURE,
        Some(_) => EXIT_USAGE,
        None => EXIT_FAILURE,
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            anyhow::bail!(Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let out = cli.command.output().clone();
    if out.emit_plot_script && out.out.is_none() {
        anyhow::bail!(Usage("--emit-plot-script needs --out".into()));
    }
    let meta = Meta {
        command: cli.command.name(),
        config: serde_json::to_value(&cli.command)?,
        seed: commands::seed_of(&cli.command),
    };
    let start = Instant::now();
    let report = commands::run(&cli.command)?;
    let elapsed = start.elapsed().as_secs_f64();
    match &out.out {
        Some(path) => output::write_all(&report, &meta, out.format, path, out.emit_plot_script, elapsed)?,
        None => {
            let text = output::render(&report, &meta, out.format)?;
            std::io::stdout()
                .lock()
                .write_all(text.as_bytes())
                .context("writing to stdout")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use args::Format;

    fn parse(argv: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("erw").chain(argv.iter().copied())).unwrap()
    }

    fn csv(argv: &[&str]) -> Result<String> {
        let cli = parse(argv);
        let meta = Meta {
            command: cli.command.name(),
            config: serde_json::to_value(&cli.command)?,
            seed: commands::seed_of(&cli.command),
        };
        output::render(&commands::run(&cli.command)?, &meta, Format::Csv)
    }

    #[test]
    fn critical_values_in_csv() {
        let text = csv(&["critical", "--k", "3"]).unwrap();
        let values: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        for (v, e) in values.iter().zip([5.0 / 6.0, 2.0 / 3.0, 11.0 / 12.0]) {
            assert!((v - e).abs() <= 1e-12);
        }
    }

    #[test]
    fn bad_arguments_exit_with_usage_code() {
        assert!(Cli::try_parse_from(["erw", "critical", "--bogus"]).is_err());
        let err = csv(&["fixed-points", "--k", "2"]).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
        let err = csv(&["cgf", "--source", "closed-form", "--k", "3"]).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
        let err = csv(&["current-check", "--y1", "0.6", "--y2", "0.7", "--pairs", "8000"]).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_USAGE);
        assert_eq!(
            exit_code(&run(parse(&["--threads", "0", "critical"])).unwrap_err()),
            EXIT_USAGE
        );
        assert_eq!(
            exit_code(&run(parse(&["critical", "--emit-plot-script"])).unwrap_err()),
            EXIT_USAGE
        );
    }

    #[test]
    fn numerical_failures_exit_with_failure_code() {
        let err = anyhow::Error::from(erw_core::Error::NonConvergence("stalled".into()));
        assert_eq!(exit_code(&err), EXIT_FAILURE);
        let err = anyhow::Error::from(std::io::Error::other("disk full"));
        assert_eq!(exit_code(&err), EXIT_FAILURE);
    }

    #[test]
    fn seeded_runs_are_byte_identical() {
        let argv = [
            "mc",
            "--k",
            "3",
            "--p",
            "0.8",
            "--n",
            "300",
            "--samples",
            "200",
            "--seed",
            "9",
        ];
        let a = csv(&argv).unwrap();
        assert_eq!(a, csv(&argv).unwrap());
        let mut other = argv;
        other[10] = "10";
        assert_ne!(a, csv(&other).unwrap());
    }

    #[test]
    fn writes_data_sidecar_and_plot_script() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("dist.json");
        let out_s = out.to_str().unwrap();
        run(parse(&[
            "exact-dist",
            "--n",
            "50",
            "--format",
            "json",
            "--out",
            out_s,
            "--emit-plot-script",
        ]))
        .unwrap();

        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(doc["meta"]["command"], "exact-dist");
        assert_eq!(doc["data"].as_array().unwrap().len(), 51);

        let side: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("dist.json.meta.json")).unwrap()).unwrap();
        assert_eq!(side["data_file"], "dist.json");
        assert!(side["elapsed_seconds"].as_f64().unwrap() >= 0.0);
        assert_eq!(side["config"]["n"], 50);

        let script = std::fs::read_to_string(dir.path().join("dist.plot.py")).unwrap();
        assert!(script.contains("\"dist.json\"") && script.contains("log_prob"));
    }

    #[test]
    fn every_command_runs_on_small_inputs() {
        let cases: &[&[&str]] = &[
            &["fixed-points", "--k", "3", "--p", "0.9"],
            &["critical", "--step-limit"],
            &["entropy", "--n", "200,400,800", "--y-points", "5"],
            &["crossings", "--n", "500", "--samples", "20"],
            &["trajectory", "--y", "0.7", "--points", "101"],
            &[
                "optimal-path",
                "--y",
                "0.8",
                "--time-steps",
                "10",
                "--phi-levels",
                "640",
            ],
            &[
                "cgf",
                "--kind",
                "majority",
                "--k",
                "1",
                "--p",
                "0.75",
                "--source",
                "closed-form",
                "--lambda-points",
                "5",
            ],
            &["cgf", "--source", "finite-n", "--n", "500", "--lambda-points", "5"],
            &["legendre", "--lambda-points", "100", "--y-points", "5"],
            &["phase-scan", "--p-points", "11", "--x-points", "11"],
            &["decay-exponent", "--n", "100,300,1000"],
            &["current-check", "--y1", "0.6", "--y2", "0.7", "--pairs", "400:0.5"],
        ];
        for argv in cases {
            let text = csv(argv).unwrap_or_else(|e| panic!("{argv:?}: {e:#}"));
            assert!(text.lines().count() >= 2, "{argv:?} produced no rows");
        }
    }
}
