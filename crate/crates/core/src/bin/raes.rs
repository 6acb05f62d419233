//! `raes` command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raes::audio::{read_wav, write_wav, DEFAULT_SAMPLE_RATE};
use raes::metrics::{count_flops, evaluate, processed_path, render_table, rt_factor};
use raes::nn::{fixtures, Architecture, Model, WeightBundle};
use raes::pipeline::{process_signal, MaskSource, PipelineConfig, PipelineState};
use raes::synth::dataset::{read_manifest, synth_dataset, SynthConfig};
use raes::AudioSignal;

#[derive(Parser)]
#[command(name = "raes", version, about = "Residual acoustic echo suppression")]
struct Cli {
    /// Seed for every randomized step. Overrides the seed in a synth config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifest.
    Synth {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the pipeline over one mic/far-end pair.
    Process {
        #[arg(long)]
        mic: PathBuf,
        /// Far-end reference.
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Run the pipeline over every record of a manifest, writing
    /// `<out-dir>/<id>.wav`.
    Batch {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Score processed outputs against a manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        processed: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Real-time factor, analytic MFLOPs and model size.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        /// Timed repetitions; the median is reported.
        #[arg(long, default_value_t = 3)]
        runs: usize,
    },
    /// Write a synthetic weight file (no training involved).
    ExportFixture {
        #[arg(long, value_enum)]
        kind: FixtureKind,
        /// Mask value for `constant`.
        #[arg(long, default_value_t = 0.5)]
        value: f32,
        /// Weight scale for `random`.
        #[arg(long, default_value_t = 1.0)]
        gain: f32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, required_unless_present = "af_only")]
    model: Option<PathBuf>,
    /// Skip the network and emit the adaptive filter output.
    #[arg(long)]
    af_only: bool,
    /// Force masks to 0/1 when the DTD head is at least this confident.
    #[arg(long, num_args = 0..=1, default_missing_value = "0.9")]
    dtd_gate: Option<f32>,
    /// Training profile tag, recorded only.
    #[arg(long)]
    alpha_profile: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    Zero,
    Passthrough,
    Constant,
    Random,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Synth { config } => cmd_synth(&config, seed),
        Command::Process {
            mic,
            reference,
            out,
            pipeline,
        } => cmd_process(&mic, &reference, &out, &pipeline),
        Command::Batch {
            manifest,
            out_dir,
            pipeline,
        } => cmd_batch(&manifest, &out_dir, &pipeline),
        Command::Eval {
            manifest,
            processed,
            out,
        } => cmd_eval(&manifest, &processed, &out),
        Command::Bench {
            model,
            seconds,
            runs,
        } => cmd_bench(&model, seconds, runs, seed.unwrap_or(0)),
        Command::ExportFixture {
            kind,
            value,
            gain,
            out,
        } => cmd_export(kind, value, gain, seed.unwrap_or(0), &out),
    }
}

fn cmd_synth(config: &Path, seed: Option<u64>) -> Result<()> {
    ensure!(config.is_file(), "config not found: {}", config.display());
    let mut cfg = SynthConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let summary = synth_dataset(&cfg)?;
    let [ne, fe, dt] = summary.label_histogram;
    println!("records        {}", summary.records);
    println!("silent near    {}", summary.silent_nearend);
    println!("frames near    {ne}");
    println!("frames far     {fe}");
    println!("frames double  {dt}");
    println!("manifest       {}", summary.manifest.display());
    Ok(())
}

fn load_model(path: &Path) -> Result<Arc<Model>> {
    ensure!(path.is_file(), "model not found: {}", path.display());
    let bundle = WeightBundle::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(Arc::new(Model::new(Arc::new(bundle))?))
}

struct Runner {
    source: MaskSource,
    cfg: PipelineConfig,
}

impl Runner {
    fn new(args: &PipelineArgs) -> Result<Self> {
        if let Some(c) = args.dtd_gate {
            ensure!(
                (0.5..=1.0).contains(&c),
                "--dtd-gate must be in [0.5, 1], got {c}"
            );
        }
        let source = if args.af_only {
            MaskSource::AfOnly
        } else {
            let path = args.model.as_deref().context("--model is required")?;
            MaskSource::Network(load_model(path)?)
        };
        let cfg = PipelineConfig {
            dtd_gate: args.dtd_gate,
            ..PipelineConfig::default()
        };
        Ok(Self { source, cfg })
    }

    fn run(&self, mic: &AudioSignal, far: &AudioSignal) -> Result<AudioSignal> {
        ensure!(
            mic.len() == far.len(),
            "mic has {} samples but the reference has {}",
            mic.len(),
            far.len()
        );
        let mut state = PipelineState::new(self.source.clone(), self.cfg.clone())?;
        Ok(process_signal(mic, far, &mut state)?)
    }
}

fn cmd_process(mic: &Path, reference: &Path, out: &Path, args: &PipelineArgs) -> Result<()> {
    for p in [mic, reference] {
        ensure!(p.is_file(), "input not found: {}", p.display());
    }
    let runner = Runner::new(args)?;
    let mic = read_wav(mic, DEFAULT_SAMPLE_RATE)?;
    let far = read_wav(reference, DEFAULT_SAMPLE_RATE)?;
    let y = runner.run(&mic, &far)?;
    write_wav(out, &y)?;
    if let Some(tag) = &args.alpha_profile {
        println!("profile {tag}");
    }
    println!("wrote {} ({:.2} s)", out.display(), y.duration_secs());
    Ok(())
}

fn cmd_batch(manifest: &Path, out_dir: &Path, args: &PipelineArgs) -> Result<()> {
    ensure!(
        manifest.is_file(),
        "manifest not found: {}",
        manifest.display()
    );
    let runner = Runner::new(args)?;
    let root = manifest.parent().unwrap_or(Path::new("."));
    let records = read_manifest(manifest)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for rec in &records {
        let mic = read_wav(root.join(&rec.d), rec.sample_rate)?;
        let far = read_wav(root.join(&rec.u), rec.sample_rate)?;
        let y = runner
            .run(&mic, &far)
            .with_context(|| format!("record {}", rec.id))?;
        write_wav(processed_path(out_dir, &rec.id), &y)?;
    }
    println!(
        "processed {} records into {}",
        records.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_eval(manifest: &Path, processed: &Path, out: &Path) -> Result<()> {
    ensure!(
        manifest.is_file(),
        "manifest not found: {}",
        manifest.display()
    );
    ensure!(
        processed.is_dir(),
        "processed directory not found: {}",
        processed.display()
    );
    let report = evaluate(manifest, processed)?;
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(out, json).with_context(|| format!("writing {}", out.display()))?;
    print!("{}", render_table(&report));
    if !report.missing.is_empty() {
        println!(
            "missing {}: {}",
            report.missing.len(),
            report.missing.join(", ")
        );
    }
    Ok(())
}

fn cmd_bench(model: &Path, seconds: f64, runs: usize, seed: u64) -> Result<()> {
    ensure!(
        seconds > 0.0 && runs > 0,
        "--seconds and --runs must be positive"
    );
    let size = fs::metadata(model)
        .with_context(|| format!("model not found: {}", model.display()))?
        .len();
    let net = load_model(model)?;
    let n = (seconds * DEFAULT_SAMPLE_RATE as f64).round() as usize;
    if n < 128 {
        bail!("--seconds too short");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let far: Vec<f32> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mic: Vec<f32> = (0..n)
        .map(|i| if i >= 5 { 0.5 * far[i - 5] } else { 0.0 } + rng.gen_range(-0.05..0.05))
        .collect();
    let far = AudioSignal::new(far, DEFAULT_SAMPLE_RATE)?;
    let mic = AudioSignal::new(mic, DEFAULT_SAMPLE_RATE)?;
    let mut failure = None;
    let rt = rt_factor(seconds, runs, || {
        let mut state = PipelineState::with_model(net.clone()).expect("validated model");
        if let Err(e) = process_signal(&mic, &far, &mut state) {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    let flops = count_flops(net.weights().architecture());
    println!("audio          {seconds:.1} s");
    println!("rt factor      {rt:.4}");
    println!("mflops/frame   {:.3}", flops.mflops());
    println!("parameters     {}", net.weights().parameter_count());
    println!("model size     {:.3} MB", size as f64 / 1e6);
    Ok(())
}

fn cmd_export(kind: FixtureKind, value: f32, gain: f32, seed: u64, out: &Path) -> Result<()> {
    let bundle = match kind {
        FixtureKind::Zero => fixtures::zero_bundle(),
        FixtureKind::Passthrough => fixtures::constant_mask_bundle(1.0),
        FixtureKind::Constant => {
            ensure!((0.0..=1.0).contains(&value), "--value must be in [0, 1]");
            fixtures::constant_mask_bundle(value)
        }
        FixtureKind::Random => fixtures::random_bundle(seed, gain),
    };
    debug_assert_eq!(bundle.architecture(), &Architecture::default());
    bundle.save(out)?;
    println!(
        "wrote {} ({} parameters)",
        out.display(),
        bundle.parameter_count()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use raes::pipeline::DEFAULT_DTD_CONFIDENCE;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn dtd_gate_defaults_when_given_bare() {
        let cli = Cli::try_parse_from([
            "raes",
            "process",
            "--mic",
            "a",
            "--ref",
            "b",
            "--out",
            "c",
            "--af-only",
            "--dtd-gate",
        ])
        .unwrap();
        match cli.command {
            Command::Process { pipeline, .. } => {
                assert_eq!(pipeline.dtd_gate, Some(DEFAULT_DTD_CONFIDENCE))
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn model_required_without_af_only() {
        assert!(
            Cli::try_parse_from(["raes", "process", "--mic", "a", "--ref", "b", "--out", "c"])
                .is_err()
        );
    }
}
