use crimeflow::synth::{generate, SynthConfig, SynthFile};

use super::{rel, SYNTH_DATA_DIR, SYNTH_TRUTH_DIR};
use crate::args::SynthArgs;
use crate::error::Result;
use crate::fsio::{core_io, Stage};
use crate::Context;

pub const GROUND_TRUTH: &str = "ground_truth.json";

pub fn resolve(ctx: &Context, a: &SynthArgs) -> SynthConfig {
    let mut cfg = ctx.config.synth.clone().unwrap_or_default();
    cfg.seed = ctx.seed;
    if let Some(v) = a.width {
        cfg.width = v;
    }
    if let Some(v) = a.height {
        cfg.height = v;
    }
    if let Some(v) = a.transitions {
        cfg.transitions_per_year = v;
    }
    if let Some(v) = a.gravity {
        cfg.gravity = v;
    }
    if let Some(v) = a.gamma {
        cfg.truth.gamma = v;
    }
    if let Some(v) = a.delta {
        cfg.truth.delta = v;
    }
    if let Some(v) = a.dispersion {
        cfg.dispersion = Some(v);
    }
    if a.poisson {
        cfg.dispersion = None;
    }
    if let Some(v) = a.first_year {
        cfg.first_year = v;
    }
    if let Some(v) = a.feature_years {
        cfg.feature_years = v;
    }
    cfg
}

pub fn run(ctx: &Context, a: &SynthArgs) -> Result<()> {
    let cfg = resolve(ctx, a);
    cfg.validate()?;
    let settings = serde_json::to_value(&cfg).expect("synth config serializes");
    let mut stage = Stage::new("synth generate", &ctx.out_dir, ctx.seed, ctx.threads, settings);
    let city = generate(&cfg)?;
    stage.step("generate");
    for file in SynthFile::ALL {
        stage.write(&rel(SYNTH_DATA_DIR, file.file_name()), |w| core_io(city.write_file(file, w)))?;
    }
    stage.write(&rel(SYNTH_TRUTH_DIR, GROUND_TRUTH), |w| core_io(city.write_ground_truth(w)))?;
    stage.finish()?;
    Ok(())
}
