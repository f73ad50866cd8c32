use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use smoothconv::analyzer::{backward_step_response, forward_step_response, with_unit_kernels, ArtifactReport};
use smoothconv::conv::{ConvGeometry, Padding};
use smoothconv::layers::{build_downsample_block, build_upsample_block, Approach, ConvLayer, Init, Layer};
use smoothconv::smooth::{integer_grid, is_checkerboard_free, rational_grid, smooth_kernel, Grid};
use smoothconv::train::config::{Precision, Preset, Task};
use smoothconv::train::gan::{build_gan, checkpoints_csv};
use smoothconv::train::{
    load_into, metrics_csv, read_manifest, sample_grid, train_classifier, train_gan, TrainConfig,
};
use smoothconv::{pgm, AnyTensor, Error, Rng, Scalar, Tensor3};

#[derive(Parser)]
#[command(name = "smoothconv", version, about = "Fixed smooth convolution kernels and checkerboard analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BlockKind {
    Up,
    Down,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproachArg {
    None,
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

impl ApproachArg {
    fn get(self) -> Option<Approach> {
        match self {
            ApproachArg::None => None,
            ApproachArg::One => Some(Approach::One),
            ApproachArg::Two => Some(Approach::Two),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Classify,
    Gan,
}

#[derive(Subcommand)]
enum Command {
    /// Print the smooth kernel slice and optionally save the depthwise kernel.
    Kernel {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        rate: u64,
        #[arg(long)]
        order: usize,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        channels: u64,
        /// FSCT output file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check whether a stored kernel factors through the zero-order hold.
    Verify {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        rate: u64,
    },
    /// Step response and checkerboard score of a resampling block.
    Analyze {
        #[arg(long, value_enum)]
        block: BlockKind,
        #[arg(long, value_enum, default_value = "none")]
        approach: ApproachArg,
        #[arg(long, default_value_t = 0)]
        order: usize,
        #[arg(long, default_value_t = 2)]
        stride: usize,
        #[arg(long = "kernel-size", default_value_t = 3)]
        kernel_size: usize,
        #[arg(long = "input-size", default_value_t = 32)]
        input_size: usize,
        #[arg(long, default_value_t = 0)]
        padding: usize,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        /// Random normal kernels from this seed instead of all ones.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a classifier or a GAN from a key=value config file.
    Train {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a sample grid from a saved generator.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        count: usize,
    },
}

/// Failure with its exit code: 1 for FAIL or invalid input, 2 for I/O.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Io(_) | Error::Format(_)) { 2 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

fn invalid(msg: impl Display) -> Failure {
    Failure { code: 1, message: msg.to_string() }
}

fn io_failure(path: &Path, e: impl Display) -> Failure {
    Failure { code: 2, message: format!("{}: {e}", path.display()) }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn print_grid<T: Display + Clone>(g: &Grid<T>) {
    for r in 0..g.rows() {
        let row: Vec<String> = g.row(r).iter().map(|v| v.to_string()).collect();
        println!("{}", row.join(" "));
    }
}

fn cmd_kernel(rate: usize, order: usize, channels: usize, out: Option<PathBuf>) -> Result<(), Failure> {
    let k = smooth_kernel(order, rate, channels)?;
    print_grid(k.slice());
    if let Some(path) = out {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            create_dir(dir)?;
        }
        let n = smoothconv::tensor::write_tensor_file(&AnyTensor::Four(k.weights::<f32>()), &path)?;
        eprintln!("wrote {} ({n} bytes)", path.display());
    }
    Ok(())
}

fn slices(t: &AnyTensor<f64>) -> Vec<Grid<f64>> {
    match t {
        AnyTensor::Three(v) => (0..v.channels())
            .map(|c| Grid::from_vec(v.height(), v.width(), v.channel(c).to_vec()).expect("channel shape"))
            .collect(),
        AnyTensor::Four(k) => {
            let mut out = Vec::new();
            for o in 0..k.out_channels() {
                for i in 0..k.in_channels() {
                    let s = k.slice(o, i);
                    if s.iter().any(|&v| v != 0.0) {
                        out.push(Grid::from_vec(k.kh(), k.kw(), s.to_vec()).expect("slice shape"));
                    }
                }
            }
            out
        }
    }
}

/// Exact divisibility of one slice: integer arithmetic when every entry is
/// an integer, exact rationals otherwise.
fn verify_slice(g: &Grid<f64>, rate: usize) -> Option<String> {
    if let Some(ints) = integer_grid(g) {
        return is_checkerboard_free(&ints, rate).map(|q| grid_text(&q));
    }
    let r = rational_grid(g)?;
    is_checkerboard_free(&r, rate).map(|q| grid_text(&q))
}

fn grid_text<T: Display + Clone>(g: &Grid<T>) -> String {
    (0..g.rows())
        .map(|r| g.row(r).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn cmd_verify(kernel: &Path, rate: usize) -> Result<bool, Failure> {
    let t: AnyTensor<f64> = smoothconv::tensor::read_tensor_file(kernel)?;
    let slices = slices(&t);
    if slices.is_empty() {
        // the zero kernel factors trivially
        println!("PASS");
        return Ok(true);
    }
    let mut quotient = None;
    for s in &slices {
        match verify_slice(s, rate) {
            Some(q) => {
                quotient.get_or_insert(q);
            }
            None => {
                println!("FAIL");
                return Ok(false);
            }
        }
    }
    println!("PASS");
    println!("{}", quotient.unwrap_or_default());
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn analysis_block(
    block: BlockKind,
    approach: Option<Approach>,
    order: usize,
    stride: usize,
    kernel_size: usize,
    padding: usize,
    channels: usize,
    seed: Option<u64>,
) -> Result<Vec<Layer<f64>>, Failure> {
    if kernel_size == 0 || stride == 0 || channels == 0 {
        return Err(invalid("stride, kernel size and channels must be positive"));
    }
    let pad = Padding::uniform(padding);
    let layers = match (block, approach) {
        (BlockKind::Up, Some(a)) => build_upsample_block(a, order, channels, channels, kernel_size, stride, pad)?,
        (BlockKind::Down, Some(a)) => build_downsample_block(a, order, channels, channels, kernel_size, stride, pad)?,
        (BlockKind::Up, None) => {
            let g = ConvGeometry::transposed(stride).with_padding(pad);
            vec![Layer::Conv(ConvLayer::new(channels, channels, kernel_size, g))]
        }
        (BlockKind::Down, None) => {
            let g = ConvGeometry::strided(stride).with_padding(pad);
            vec![Layer::Conv(ConvLayer::new(channels, channels, kernel_size, g))]
        }
    };
    Ok(match seed {
        Some(s) => {
            let mut rng = Rng::new(s);
            let mut layers = layers;
            for l in &mut layers {
                l.initialize(&mut rng, Init::Normal(1.0));
            }
            layers
        }
        None => with_unit_kernels(&layers),
    })
}

fn write_report(dir: &Path, rep: &ArtifactReport) -> Result<(), Failure> {
    create_dir(dir)?;
    pgm::write_map(dir.join("response.pgm"), &rep.response, rep.height, rep.width)?;
    let csv = dir.join("report.csv");
    fs::write(&csv, rep.to_csv()).map_err(|e| io_failure(&csv, e))?;
    Ok(())
}

fn run_train<T: Scalar>(task: Task, cfg: &TrainConfig) -> Result<(), Failure> {
    match task {
        Task::Classify => {
            let run = train_classifier::<T>(cfg)?;
            print!("{}", metrics_csv(&run.metrics));
        }
        Task::Gan => {
            let run = train_gan::<T>(cfg)?;
            print!("{}", checkpoints_csv(&run.checkpoints));
            if let Some(last) = run.steps.last() {
                println!("final d_loss {:.6} g_loss {:.6}", last.d_loss, last.g_loss);
            }
            let score = run.checkpoints.iter().map(|c| c.score).fold(0.0, f64::max);
            println!("generator step-response score {score}");
        }
    }
    if let Some(dir) = &cfg.out_dir {
        eprintln!("outputs in {}", dir.display());
    }
    Ok(())
}

fn cmd_train(task: TaskArg, config: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let text = fs::read_to_string(config).map_err(|e| io_failure(config, e))?;
    let task = match task {
        TaskArg::Classify => Task::Classify,
        TaskArg::Gan => Task::Gan,
    };
    let mut cfg = TrainConfig::parse(&text, task)?;
    if out.is_some() {
        cfg.out_dir = out;
    }
    if let Some(dir) = &cfg.out_dir {
        create_dir(dir)?;
    }
    match cfg.precision {
        Precision::F32 => run_train::<f32>(task, &cfg),
        Precision::F64 => run_train::<f64>(task, &cfg),
    }
}

fn cmd_sample(model: &Path, seed: u64, out: &Path, count: usize) -> Result<(), Failure> {
    if count == 0 {
        return Err(invalid("count must be positive"));
    }
    let manifest = read_manifest(model)?;
    let preset: Preset = manifest.get("preset")?.parse()?;
    let approach = match manifest.get("approach")? {
        "none" => None,
        a => Some(a.parse::<Approach>()?),
    };
    let parse = |key: &str| -> Result<usize, Failure> {
        manifest.get(key)?.parse().map_err(|_| invalid(format!("manifest {key} is not a number")))
    };
    let mut pair = build_gan::<f32>(preset, approach, parse("order")?, parse("latent_dim")?)?;
    let base = model.parent().unwrap_or(Path::new("."));
    load_into(&mut pair.generator, &manifest, base)?;
    let grid: Tensor3<f32> = sample_grid(&mut pair, seed, count)?;
    create_dir(out)?;
    for f in pgm::write_image(out.join(format!("sample_{seed}.pgm")), &grid)? {
        println!("{}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Kernel { rate, order, channels, out } => cmd_kernel(rate as usize, order, channels as usize, out),
        Command::Verify { kernel, rate } => {
            if cmd_verify(&kernel, rate as usize)? {
                Ok(())
            } else {
                Err(Failure { code: 1, message: String::new() })
            }
        }
        Command::Analyze { block, approach, order, stride, kernel_size, input_size, padding, channels, seed, out } => {
            let layers = analysis_block(block, approach.get(), order, stride, kernel_size, padding, channels, seed)?;
            let rep = match block {
                BlockKind::Up => forward_step_response(&layers, input_size)?,
                BlockKind::Down => backward_step_response(&layers, input_size)?,
            };
            if let Some(dir) = out {
                write_report(&dir, &rep)?;
            }
            println!("score {}", rep.score);
            Ok(())
        }
        Command::Train { task, config, out } => cmd_train(task, &config, out),
        Command::Sample { model, seed, out, count } => cmd_sample(&model, seed, &out, count),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
