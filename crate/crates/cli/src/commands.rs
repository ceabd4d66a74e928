use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tpstext::bezier::{bezier_decode, bezier_fit, BezierParams};
use tpstext::dataio::{
    augment_perspective, corpus_canvas, encode_pgm, make_correspondences, parse_annotations,
    render_svg, split_sides, synthetic_corpus, text_height, to_generic_json, CorpusSpec, Format,
    SvgItem, TextInstance,
};
use tpstext::geometry::{Point, Polygon};
use tpstext::gradcheck::{run_gradcheck, GradCheckOptions};
use tpstext::losses::{make_border_mask, make_gtc, BorderMask, DEFAULT_OVERSAMPLE};
use tpstext::metrics::{evaluate_pairs, fit_evaluate, FitOptions, FitReport, Representation};
use tpstext::tps::{
    decode_boundary, fit, make_fiducials, rectification_grid, Solver, TpsParams,
    DEFAULT_BOUNDARY_COLS,
};

use crate::output::{file_stem, write_atomic, write_json};
use crate::{
    AugmentArgs, Command, EvalArgs, FitArgs, FormatArg, Global, Input, LosscheckArgs, MasksArgs,
    RectifyArgs, RepArgs, RepKind, SynthArgs, VizArgs, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_OK,
};

pub fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Fit(a) => with_threads(&a.global, || cmd_fit(&a)),
        Command::Eval(a) => with_threads(&a.global, || cmd_eval(&a)),
        Command::Masks(a) => with_threads(&a.global, || cmd_masks(&a)),
        Command::Augment(a) => with_threads(&a.global, || cmd_augment(&a)),
        Command::Rectify(a) => cmd_rectify(&a),
        Command::Viz(a) => with_threads(&a.global, || cmd_viz(&a)),
        Command::Losscheck(a) => cmd_losscheck(&a),
        Command::Synth(a) => with_threads(&a.global, || cmd_synth(&a)),
    }
}

fn with_threads(g: &Global, f: impl FnOnce() -> Result<u8> + Send) -> Result<u8> {
    if g.threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads)
        .build()?;
    pool.install(f)
}

fn load(input: &Input) -> Result<Vec<TextInstance>> {
    let format = match input.format {
        FormatArg::Json => Format::GenericJson,
        FormatArg::Ctw1500 => Format::Ctw1500,
    };
    let parsed = parse_annotations(&input.annotations, format)
        .with_context(|| format!("reading {}", input.annotations.display()))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed.instances)
}

/// `out` itself when it names a `.json` file, otherwise `out/default_name`.
fn output_file(out: &Path, default_name: &str) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        out.to_path_buf()
    } else {
        out.join(default_name)
    }
}

fn representation(r: &RepArgs) -> Result<Representation> {
    Ok(match r.rep {
        RepKind::Tps => Representation::Tps(make_fiducials(r.distribution.into(), r.k)?),
        RepKind::Bezier => Representation::Bezier { degree: r.degree },
    })
}

fn fit_options(r: &RepArgs, g: &Global) -> FitOptions {
    FitOptions {
        per_side: r.per_side,
        regularization: r.regularization,
        resolution: g.resolution,
        ..Default::default()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "rep", rename_all = "lowercase")]
enum Shape {
    Tps {
        params: TpsParams,
        condition: f64,
        solver: Solver,
    },
    Bezier {
        params: BezierParams,
    },
}

impl Shape {
    fn boundary(&self) -> Result<Polygon> {
        Ok(match self {
            Shape::Tps { params, .. } => decode_boundary(params, DEFAULT_BOUNDARY_COLS)?,
            Shape::Bezier { params } => bezier_decode(params, DEFAULT_BOUNDARY_COLS)?,
        })
    }

    fn control_points(&self) -> Vec<Point> {
        match self {
            Shape::Tps { params, .. } => params.control_points(),
            Shape::Bezier { params } => params.control_points().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParamsFile {
    id: String,
    #[serde(flatten)]
    shape: Shape,
    rms_residual: f64,
    max_residual: f64,
}

fn fit_shape(
    inst: &TextInstance,
    rep: &Representation,
    opts: &FitOptions,
) -> tpstext::Result<ParamsFile> {
    let corr = make_correspondences(&split_sides(inst)?, opts.per_side)?;
    let (shape, rms_residual, max_residual) = match rep {
        Representation::Tps(cfg) => {
            let f = fit(cfg, &corr, opts.regularization)?;
            (
                Shape::Tps {
                    params: f.params,
                    condition: f.condition,
                    solver: f.solver,
                },
                f.rms_residual,
                f.max_residual,
            )
        }
        Representation::Bezier { degree } => {
            let f = bezier_fit(&corr, *degree)?;
            (
                Shape::Bezier { params: f.params },
                f.rms_residual,
                f.max_residual,
            )
        }
    };
    Ok(ParamsFile {
        id: inst.id.clone(),
        shape,
        rms_residual,
        max_residual,
    })
}

#[derive(Debug, Serialize)]
struct FitSummary {
    method: String,
    fitted: usize,
    failures: Vec<(String, String)>,
    mean_rms_residual: f64,
    max_rms_residual: f64,
}

fn cmd_fit(a: &FitArgs) -> Result<u8> {
    let corpus = load(&a.input)?;
    let rep = representation(&a.rep)?;
    let opts = fit_options(&a.rep, &a.global);
    let results: Vec<_> = corpus
        .par_iter()
        .map(|inst| (inst.id.clone(), fit_shape(inst, &rep, &opts)))
        .collect();
    let mut residuals = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(p) => {
                residuals.push(p.rms_residual);
                write_json(
                    &a.global.out.join(format!("{}.params.json", file_stem(&id))),
                    &p,
                )?;
            }
            Err(e) => {
                eprintln!("warning: {id}: {e}");
                failures.push((id, e.to_string()));
            }
        }
    }
    if residuals.is_empty() {
        eprintln!("error: no instance could be fitted");
        return Ok(EXIT_INPUT);
    }
    let summary = FitSummary {
        method: rep.name(),
        fitted: residuals.len(),
        mean_rms_residual: residuals.iter().sum::<f64>() / residuals.len() as f64,
        max_rms_residual: residuals.iter().copied().fold(0.0, f64::max),
        failures,
    };
    write_json(&a.global.out.join("summary.json"), &summary)?;
    println!(
        "{}: fitted {} ({} failed), mean rms residual {:.3e}, max {:.3e}",
        summary.method,
        summary.fitted,
        summary.failures.len(),
        summary.mean_rms_residual,
        summary.max_rms_residual
    );
    if !summary.failures.is_empty() {
        eprintln!("{} warning(s)", summary.failures.len());
    }
    Ok(EXIT_OK)
}

fn read_params(path: &Path) -> Result<ParamsFile> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_eval(a: &EvalArgs) -> Result<u8> {
    let corpus = load(&a.input)?;
    let res = a.global.resolution;
    let report = if a.self_check {
        let pairs: Vec<_> = corpus
            .iter()
            .map(|i| (i.id.clone(), i.polygon.clone(), i.polygon.clone()))
            .collect();
        evaluate_pairs("ground-truth", &pairs, res)?
    } else if let Some(dir) = &a.pred {
        let paths: Vec<(String, PathBuf)> = corpus
            .iter()
            .map(|i| {
                (
                    i.id.clone(),
                    dir.join(format!("{}.params.json", file_stem(&i.id))),
                )
            })
            .collect();
        let missing: Vec<&str> = paths
            .iter()
            .filter(|(_, p)| !p.exists())
            .map(|(id, _)| id.as_str())
            .collect();
        if !missing.is_empty() {
            bail!(tpstext::Error::Config(format!(
                "no fitted parameters for ids: {}",
                missing.join(", ")
            )));
        }
        let mut method = None;
        let mut pairs = Vec::with_capacity(corpus.len());
        for (inst, (_, path)) in corpus.iter().zip(&paths) {
            let p = read_params(path)?;
            let name = match &p.shape {
                Shape::Tps { params, .. } => Representation::Tps(params.config().clone()).name(),
                Shape::Bezier { params } => Representation::Bezier {
                    degree: params.degree(),
                }
                .name(),
            };
            method.get_or_insert(name);
            pairs.push((inst.id.clone(), p.shape.boundary()?, inst.polygon.clone()));
        }
        evaluate_pairs(method.as_deref().unwrap_or("predictions"), &pairs, res)?
    } else {
        fit_evaluate(
            &corpus,
            &representation(&a.rep)?,
            &fit_options(&a.rep, &a.global),
        )?
    };
    for f in &report.failures {
        eprintln!("warning: {}: {}", f.id, f.reason);
    }
    let table = FitReport::table(&[&report]);
    write_atomic(
        &a.global.out.join("report.json"),
        (report.to_json()? + "\n").as_bytes(),
    )?;
    write_atomic(&a.global.out.join("report.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(EXIT_OK)
}

fn scaled(inst: &TextInstance, scale: f64) -> Result<TextInstance> {
    let pts = inst.polygon.points().iter().map(|&p| p * scale).collect();
    Ok(TextInstance::new(
        inst.id.clone(),
        pts,
        inst.transcript.clone(),
        inst.source,
    )?)
}

fn raster_dims(canvas: (f64, f64), scale: f64) -> (usize, usize) {
    (
        (canvas.0 * scale).ceil() as usize + 1,
        (canvas.1 * scale).ceil() as usize + 1,
    )
}

fn border_mask(
    inst: &TextInstance,
    dims: (usize, usize),
    tb: f64,
    tr: f64,
) -> tpstext::Result<BorderMask> {
    let h = text_height(&split_sides(inst)?)?;
    make_border_mask(&inst.polygon, h, dims.0, dims.1, tb, tr)
}

fn cmd_masks(a: &MasksArgs) -> Result<u8> {
    if !(a.scale > 0.0) {
        bail!(tpstext::Error::Config(format!(
            "scale must be positive, got {}",
            a.scale
        )));
    }
    let corpus = load(&a.input)?;
    let dims = raster_dims(corpus_canvas(&corpus)?, a.scale);
    let cfg = make_fiducials(a.rep.distribution.into(), a.rep.k)?;
    let opts = fit_options(&a.rep, &a.global);
    let results: Vec<_> = corpus
        .par_iter()
        .map(|inst| -> Result<()> {
            let inst = scaled(inst, a.scale)?;
            let mask = border_mask(&inst, dims, a.tb, a.tr)?;
            let corr = make_correspondences(&split_sides(&inst)?, opts.per_side)?;
            let params = fit(&cfg, &corr, opts.regularization)?.params;
            let gtc = make_gtc(
                &params,
                dims.0,
                dims.1,
                (a.sigma, a.sigma),
                DEFAULT_OVERSAMPLE,
            )?;
            let stem = file_stem(&inst.id);
            write_atomic(
                &a.global.out.join(format!("{stem}.border.pgm")),
                &encode_pgm(&mask.relaxed),
            )?;
            write_atomic(
                &a.global.out.join(format!("{stem}.gtc.pgm")),
                &encode_pgm(&gtc.values),
            )?;
            Ok(())
        })
        .collect();
    let mut written = 0;
    for (inst, r) in corpus.iter().zip(results) {
        match r {
            Ok(()) => written += 1,
            Err(e) => eprintln!("warning: {}: {e:#}", inst.id),
        }
    }
    println!(
        "wrote masks for {written} of {} instances ({}×{} cells)",
        corpus.len(),
        dims.0,
        dims.1
    );
    Ok(if written == 0 { EXIT_INPUT } else { EXIT_OK })
}

fn cmd_augment(a: &AugmentArgs) -> Result<u8> {
    let corpus = load(&a.input)?;
    let extent = corpus_canvas(&corpus)?;
    let canvas = (a.width.unwrap_or(extent.0), a.height.unwrap_or(extent.1));
    let stem = a
        .input
        .annotations
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("annotations");
    for &angle in &a.angles {
        let out = augment_perspective(&corpus, angle, canvas)?;
        let path = a
            .global
            .out
            .join(format!("{}.persp{angle}.json", file_stem(stem)));
        write_atomic(&path, (to_generic_json(&out)? + "\n").as_bytes())?;
        println!("{}", path.display());
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct GridFile<'a> {
    id: &'a str,
    rows: usize,
    cols: usize,
    points: &'a [Point],
}

fn cmd_rectify(a: &RectifyArgs) -> Result<u8> {
    let p = read_params(&a.params)?;
    let Shape::Tps { params, .. } = &p.shape else {
        bail!(tpstext::Error::Config(
            "rectification needs TPS parameters".into()
        ));
    };
    let grid = rectification_grid(params, a.rows, a.cols)?;
    let path = output_file(&a.global.out, &format!("{}.grid.json", file_stem(&p.id)));
    write_json(
        &path,
        &GridFile {
            id: &p.id,
            rows: grid.rows(),
            cols: grid.cols(),
            points: grid.points(),
        },
    )?;
    println!("{}", path.display());
    Ok(EXIT_OK)
}

fn cmd_viz(a: &VizArgs) -> Result<u8> {
    let corpus = load(&a.input)?;
    let canvas = corpus_canvas(&corpus)?;
    let dims = raster_dims(canvas, 1.0);
    let rep = representation(&a.rep)?;
    let opts = fit_options(&a.rep, &a.global);
    let results: Vec<_> = corpus
        .par_iter()
        .map(|inst| -> Result<String> {
            let mut item = SvgItem::new(inst);
            if a.fitted {
                let p = fit_shape(inst, &rep, &opts)?;
                item.fitted = Some(p.shape.boundary()?.into_points());
                item.control_points = p.shape.control_points();
            }
            let mask = if a.mask {
                Some(border_mask(inst, dims, 0.6, 0.8)?)
            } else {
                None
            };
            item.mask = mask.as_ref().map(|m| &m.relaxed);
            Ok(render_svg(&[item], dims.0 as f64, dims.1 as f64)?)
        })
        .collect();
    let mut written = 0;
    for (inst, r) in corpus.iter().zip(results) {
        match r {
            Ok(svg) => {
                write_atomic(
                    &a.global.out.join(format!("{}.svg", file_stem(&inst.id))),
                    svg.as_bytes(),
                )?;
                written += 1;
            }
            Err(e) => eprintln!("warning: {}: {e:#}", inst.id),
        }
    }
    println!("wrote {written} SVG file(s)");
    Ok(if written == 0 { EXIT_INPUT } else { EXIT_OK })
}

fn cmd_losscheck(a: &LosscheckArgs) -> Result<u8> {
    let opts = GradCheckOptions {
        trials: a.trials,
        seed: a.global.seed,
        tolerance: a.tolerance,
        gradient_scale: a.corrupt_gradient,
        ..Default::default()
    };
    let report = run_gradcheck(&opts)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    let verdict = if report.passed() { "passed" } else { "FAILED" };
    eprintln!(
        "gradient check {verdict}: max relative error {:.3e} (tolerance {:.0e}) over {} checks",
        report.max_rel_error(),
        report.tolerance,
        report.checks
    );
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn cmd_synth(a: &SynthArgs) -> Result<u8> {
    let spec = CorpusSpec {
        count: a.count,
        amplitude_frac: a.amplitude,
        periods: a.periods,
        perspective_angle_deg: a.angle,
        seed: a.global.seed,
        ..Default::default()
    };
    if spec.count == 0 {
        return Err(anyhow!(tpstext::Error::Config(
            "count must be positive".into()
        )));
    }
    let corpus: Vec<TextInstance> = synthetic_corpus(&spec)?
        .into_iter()
        .map(|s| s.instance)
        .collect();
    let path = output_file(&a.global.out, "synthetic.json");
    write_atomic(&path, (to_generic_json(&corpus)? + "\n").as_bytes())?;
    println!("{}", path.display());
    Ok(EXIT_OK)
}
