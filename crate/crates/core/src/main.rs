use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stationbus::analyzer::{analyze, read_pcap, render_report, write_csv};
use stationbus::codec::MacAddress;
use stationbus::scenario::{load_scenario, run_scenario, LoadError, RunOptions, BUNDLED};
use stationbus::units::parse_duration;

const EXIT_SCENARIO: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_NO_MATCHES: u8 = 4;

#[derive(Parser)]
#[command(name = "stationbus", version, about = "GOOSE/SV station-bus simulator and delay analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario (bundled name or file) and analyse its captures.
    Run {
        scenario: String,
        /// Output directory for pcaps, delays.csv, report.txt and manifest.json.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a scenario without running it.
    Check { scenario: String },
    /// Pair two captures of one publisher and report end-to-end delays.
    Analyze {
        pub_pcap: PathBuf,
        sub_pcap: PathBuf,
        /// Publisher source MAC address.
        #[arg(long)]
        src: MacAddress,
        #[arg(long, value_parser = parse_duration, default_value = "4ms")]
        threshold: u64,
        #[arg(long, value_parser = parse_duration, default_value = "1s")]
        window: u64,
        /// Also write the per-frame delays as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// List the bundled scenarios.
    List,
}

fn load(name: &str) -> Result<stationbus::scenario::Scenario, ExitCode> {
    load_scenario(name).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            LoadError::Io { .. } | LoadError::Invalid(_) => ExitCode::from(EXIT_SCENARIO),
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for (name, text) in BUNDLED {
                let summary = text
                    .lines()
                    .take_while(|l| l.starts_with('#'))
                    .map(|l| l.trim_start_matches('#').trim())
                    .collect::<Vec<_>>()
                    .join(" ");
                println!("{name:16} {summary}");
            }
            ExitCode::SUCCESS
        }
        Command::Check { scenario } => match load(&scenario) {
            Ok(s) => {
                println!("{}: ok ({} nodes, {} links, {} traffic sources)", s.name, s.topology.nodes.len(), s.topology.links.len(), s.traffic.len());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run { scenario, out, seed } => {
            let s = match load(&scenario) {
                Ok(s) => s,
                Err(code) => return code,
            };
            let opts = RunOptions {
                out_dir: out,
                seed,
                dry_run: false,
            };
            match run_scenario(&s, &opts) {
                Ok(outcome) => {
                    let report = outcome.out_dir.join("report.txt");
                    if let Ok(text) = std::fs::read_to_string(&report) {
                        print!("{text}");
                    }
                    println!("outputs in {}", outcome.out_dir.display());
                    if s.analysis.is_some() && outcome.manifest.headline.matched == 0 {
                        eprintln!("error: no publisher frame was matched at the subscriber");
                        return ExitCode::from(EXIT_NO_MATCHES);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
        Command::Analyze {
            pub_pcap,
            sub_pcap,
            src,
            threshold,
            window,
            csv,
        } => {
            let (p, s) = match (read_pcap(&pub_pcap), read_pcap(&sub_pcap)) {
                (Ok(p), Ok(s)) => (p, s),
                (Err(e), _) | (_, Err(e)) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_RUNTIME);
                }
            };
            let a = analyze(&p.records, &s.records, src, threshold, window);
            if let Some(path) = csv {
                let written = std::fs::File::create(&path)
                    .and_then(|f| write_csv(&a.samples, std::io::BufWriter::new(f)));
                if let Err(e) = written {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(EXIT_RUNTIME);
                }
            }
            println!("pub_goose_frames={}", a.pub_goose_frames);
            println!("sub_goose_frames={}", a.sub_goose_frames);
            println!("undecodable={}", a.undecodable);
            print!("{}", render_report(&a.report));
            if a.report.count == 0 {
                return ExitCode::from(EXIT_NO_MATCHES);
            }
            ExitCode::SUCCESS
        }
    }
}
