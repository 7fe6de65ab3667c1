use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nc_sigma::module::HermitianVariant;
use ncsigma_cli::commands::run;
use ncsigma_cli::config::{Mode, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "ncsigma", version, about = "Sigma-model instantons on the noncommutative torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a Gaussian instanton and report its invariants.
    Build(Common),
    /// Evaluate a stored projection.
    Verify(Common),
    /// Relax a (perturbed) projection along the gradient flow.
    Flow(Common),
    /// Build and compare instantons over a moduli grid.
    Scan(Common),
    /// Run the internal consistency battery.
    Selftest(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Z1z2Inverse,
    Z2z1Inverse,
    Z1z2Direct,
    Z2z1Direct,
}

impl From<VariantArg> for HermitianVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Z1z2Inverse => HermitianVariant::Z1Z2Inverse,
            VariantArg::Z2z1Inverse => HermitianVariant::Z2Z1Inverse,
            VariantArg::Z1z2Direct => HermitianVariant::Z1Z2Direct,
            VariantArg::Z2z1Direct => HermitianVariant::Z2Z1Direct,
        }
    }
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    tau_re: Option<f64>,
    #[arg(long)]
    tau_im: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r: Option<i64>,
    #[arg(long)]
    q: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda_re: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda_im: Option<f64>,
    /// Truncation half-width M of the Fourier window.
    #[arg(long)]
    window: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Input projection (verify).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Hermitian-structure convention exercised by selftest.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            theta: self.theta,
            tau_re: self.tau_re,
            tau_im: self.tau_im,
            r: self.r,
            q: self.q,
            alpha: self.alpha,
            lambda_re: self.lambda_re,
            lambda_im: self.lambda_im,
            window: self.window,
            out: self.out.clone(),
            seed: self.seed,
            input: self.input.clone(),
            variant: self.variant.map(Into::into),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match &cli.command {
        Command::Build(c) => (Mode::Build, c),
        Command::Verify(c) => (Mode::Verify, c),
        Command::Flow(c) => (Mode::Flow, c),
        Command::Scan(c) => (Mode::Scan, c),
        Command::Selftest(c) => (Mode::Selftest, c),
    };
    let mut cfg = match &common.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => RunConfig::default(),
    };
    cfg.apply(&common.overrides());
    ExitCode::from(run(mode, cfg) as u8)
}
