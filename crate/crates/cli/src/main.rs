mod args;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};

use args::{Cli, FramesVerb, Verb};
use qpatch::frames::{expand_offsets, import_quad_mesh, load_frames, orient_frames, save_frames, write_quad_obj};
use qpatch::inpaint::{
    compute_frames, denoise, drop_vertices, generate_quads, inpaint, learn_self_similar, punch_holes,
    recover_vertices, stub_fill_file, DictionaryInpainter, DroppedVertices, ExternalInpainter,
    InpaintConfig, PatchInpainter, StubInpainter,
};
use qpatch::mesh::{laplacian_smooth, load_mesh, normalize_mesh, sample_points, save_mesh};
use qpatch::metrics::{cloud_to_mesh, compression_ledger, psnr, psnr_from_rms};
use qpatch::patch::{extract_dataset, read_dataset, reconstruct_mesh, write_dataset};
use qpatch::sparse::{ksvd_learn_dataset, load_dict, reconstruct_patches, save_dict};
use qpatch::{Error, FrameChoice, Mesh, Method, QuadMesh, RunConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = set_threads() {
        report_error(e.kind(), &e.to_string());
        return ExitCode::FAILURE;
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}

fn report_error(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message.trim() } }));
}

fn set_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("QP_THREADS") else { return Ok(()) };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("QP_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn conflict(msg: &str) -> Error {
    Error::Config(format!("conflicting flags: {msg}"))
}

struct Timer {
    on: bool,
    start: Instant,
}

impl Timer {
    fn lap(&mut self, stage: &str) {
        if self.on {
            eprintln!("timing {stage}: {:.3}s", self.start.elapsed().as_secs_f64());
        }
        self.start = Instant::now();
    }
}

fn print(v: Value) {
    println!("{v}");
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = cli.knobs.to_config();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)?;
        cfg.merge_json(&serde_json::from_str(&text)?)?;
    }
    cfg.validate()?;
    let mut timer = Timer {
        on: cli.timing,
        start: Instant::now(),
    };
    match cli.verb {
        Verb::Normalize {
            input,
            output,
            record,
            target_vertices,
        } => {
            let mesh = load_mesh(&input, None)?;
            let (out, rec) = normalize_mesh(&mesh, target_vertices)?;
            save_mesh(&output, &out)?;
            if let Some(path) = record {
                rec.save(path)?;
            }
            print(json!({ "vertices": out.vertices.len(), "faces": out.faces.len(), "scale": rec.scale }));
        }
        Verb::Smooth { input, output } => {
            let mesh = load_mesh(&input, None)?;
            save_mesh(&output, &laplacian_smooth(&mesh, cfg.smooth_iterations)?)?;
            print(json!({ "iterations": cfg.smooth_iterations }));
        }
        Verb::Frames { source } => frames(source, &cfg)?,
        Verb::Extract { input, output, frames } => {
            let mesh = load_mesh(&input, None)?;
            let ic = pipeline_config(&cfg)?;
            let frames = match frames {
                Some(path) => load_frames(path)?,
                None => compute_frames(&mesh, &ic)?,
            };
            timer.lap("frames");
            let cloud = sample_points(&mesh, ic.density(), cfg.seed)?;
            let mut ds = extract_dataset(&cloud, &frames, &ic.params(), Some(&mesh), None)?;
            ds.provenance.source = input.display().to_string();
            ds.provenance.frame_params = Some(serde_json::to_value(&cfg)?);
            timer.lap("extract");
            write_dataset(&output, &ds)?;
            print(json!({
                "patches": ds.len(),
                "rejected_frames": ds.provenance.rejected.len(),
                "samples": cloud.len(),
                "radius": ds.radius,
                "resolution": ds.resolution,
                "bin_size": ds.bin_size(),
            }));
        }
        Verb::LearnDict { input, output } => {
            let ds = read_dataset(&input)?;
            let (d, rep) = ksvd_learn_dataset(&ds, &cfg.ksvd_options())?;
            timer.lap("ksvd");
            save_dict(&output, &d)?;
            print(json!({
                "atoms": d.p(),
                "dimension": d.m(),
                "signals": ds.len(),
                "objective": rep.objective,
                "replaced_atoms": rep.replaced_atoms,
            }));
        }
        Verb::Reconstruct {
            input,
            output,
            reference,
        } => {
            let mut ds = read_dataset(&input)?;
            let mut summary = json!({ "patches": ds.len(), "bin_size": ds.bin_size() });
            if let Some(path) = &cfg.dictionary {
                let d = load_dict(path)?;
                let (coded, stats) = reconstruct_patches(&ds, &d, cfg.sparsity)?;
                ds = coded;
                summary["mean_patch_residual"] = json!(stats.mean_residual);
                timer.lap("coding");
            }
            let mesh = reconstruct_mesh(&ds)?;
            save_mesh(&output, &mesh)?;
            if let Some(path) = reference {
                let reference = load_mesh(path, None)?;
                score(&mesh, &reference, &mut summary)?;
            }
            print(summary);
        }
        Verb::CompressReport {
            mesh,
            patches,
            reconstructed,
            json,
        } => {
            let source = load_mesh(&mesh, None)?;
            let ds = read_dataset(&patches)?;
            let quads = match &cfg.frames {
                FrameChoice::Import { path } => import_quad_mesh(path)?,
                FrameChoice::Generate => generate_quads(&source, &pipeline_config(&cfg)?)?,
            };
            let p = match reconstructed {
                Some(path) => Some(psnr(&load_mesh(path, None)?, &source)?),
                None => None,
            };
            let ledger = compression_ledger(ds.len(), cfg.sparsity, &quads, &source, p);
            if json {
                print(serde_json::to_value(&ledger)?);
            } else {
                let name = mesh.file_stem().map_or("mesh".into(), |s| s.to_string_lossy().into_owned());
                print!("{}", ledger.to_table(&name));
            }
        }
        Verb::PunchHoles {
            input,
            output,
            hole_radius,
            spacing,
            record,
        } => {
            let mesh = load_mesh(&input, None)?;
            let spacing = spacing.unwrap_or(4.0 * hole_radius);
            let (damaged, rec) = punch_holes(&mesh, hole_radius, spacing, cfg.seed)?;
            save_mesh(&output, &damaged)?;
            if let Some(path) = record {
                write_json(&path, &rec)?;
            }
            print(json!({
                "holes": rec.centers.len(),
                "removed_vertices": rec.removed_vertices.len(),
                "vertices": damaged.vertices.len(),
                "faces": damaged.faces.len(),
            }));
        }
        Verb::DropVertices { input, output, ratio } => {
            let mesh = load_mesh(&input, None)?;
            let d = drop_vertices(&mesh, ratio, cfg.seed)?;
            write_json(&output, &d)?;
            print(json!({ "missing": d.missing.len(), "vertices": mesh.vertices.len() }));
        }
        Verb::Inpaint {
            input,
            output,
            reference,
            report,
        } => {
            check_method_flags(&cfg, false)?;
            let damaged = load_mesh(&input, None)?;
            let ic = pipeline_config(&cfg)?;
            let reference = reference.map(|p| load_mesh(p, None)).transpose()?;
            let model = inpainter(&cfg, Some((&damaged, &ic)))?;
            timer.lap("setup");
            let (out, rep, _) = inpaint(&damaged, model.as_deref(), &ic, reference.as_ref())?;
            if cli.timing {
                for t in &rep.timing {
                    eprintln!("timing {}: {:.3}s", t.stage, t.seconds);
                }
            }
            save_mesh(&output, &out)?;
            let mut summary = serde_json::to_value(&rep)?;
            if let Value::Object(o) = &mut summary {
                o.remove("timing");
                for h in o.get_mut("holes").and_then(Value::as_array_mut).into_iter().flatten() {
                    if let Value::Object(h) = h {
                        h.remove("vertex_errors");
                    }
                }
            }
            if let Some(path) = report {
                write_json(&path, &rep)?;
            }
            print(summary);
        }
        Verb::Recover { input, dropped, output } => {
            check_method_flags(&cfg, true)?;
            let mesh = load_mesh(&input, None)?;
            let dropped: DroppedVertices = serde_json::from_slice(&std::fs::read(&dropped)?)?;
            let ic = pipeline_config(&cfg)?;
            let model = inpainter(&cfg, None)?;
            let (out, rep) = recover_vertices(&mesh, &dropped, model.as_deref(), &ic)?;
            timer.lap("recover");
            save_mesh(&output, &out)?;
            print(json!({
                "missing": rep.missing,
                "from_patches": rep.from_patches,
                "from_neighbours": rep.from_neighbours,
                "rmse": rep.rmse,
                "patches": rep.patches,
                "bin_size": ic.params().bin_size(),
            }));
        }
        Verb::Denoise { input, output } => {
            let path = cfg
                .dictionary
                .as_ref()
                .ok_or_else(|| Error::Config("denoise needs --dict".into()))?;
            let d = load_dict(path)?;
            let noisy = load_mesh(&input, None)?;
            let (out, rep) = denoise(&noisy, &d, &pipeline_config(&cfg)?)?;
            timer.lap("denoise");
            save_mesh(&output, &out)?;
            print(json!({
                "patches": rep.patches,
                "rejected_frames": rep.rejected_frames,
                "mean_patch_residual": rep.mean_patch_residual,
                "from_patches": rep.from_patches,
                "from_neighbours": rep.from_neighbours,
            }));
        }
        Verb::Eval { input, reference } => {
            let mesh = load_mesh(&input, None)?;
            let reference = load_mesh(&reference, None)?;
            let mut summary = json!({});
            score(&mesh, &reference, &mut summary)?;
            print(summary);
        }
        Verb::StubFill { input, output } => {
            stub_fill_file(&input, &output)?;
        }
    }
    timer.lap("total");
    Ok(())
}

fn frames(source: FramesVerb, cfg: &RunConfig) -> Result<(), Error> {
    let (quads, output) = match source {
        FramesVerb::Import { input, output } => (import_quad_mesh(input)?, output),
        FramesVerb::Generate {
            input,
            output,
            quads_output,
        } => {
            if matches!(cfg.frames, FrameChoice::Import { .. }) {
                return Err(conflict("`frames generate` with --quads"));
            }
            let mesh = load_mesh(&input, None)?;
            let q = generate_quads(&mesh, &pipeline_config(cfg)?)?;
            if let Some(path) = quads_output {
                write_quad_obj(path, &q)?;
            }
            (q, output)
        }
    };
    let frames = expand_offsets(&orient_frames(&quads)?, cfg.overlap, cfg.quad_length);
    save_frames(&output, &frames)?;
    print(json!({ "quads": quads.len(), "frames": frames.len() }));
    Ok(())
}

fn pipeline_config(cfg: &RunConfig) -> Result<InpaintConfig, Error> {
    let quads: Option<QuadMesh> = match &cfg.frames {
        FrameChoice::Import { path } => Some(import_quad_mesh(path)?),
        FrameChoice::Generate => None,
    };
    let ic = cfg.inpaint_config(quads);
    ic.validate()?;
    Ok(ic)
}

/// Rejects flag combinations that a method would silently ignore.
fn check_method_flags(cfg: &RunConfig, dict_required: bool) -> Result<(), Error> {
    let tag = cfg.method.tag();
    if cfg.method != Method::CnnFile && cfg.fill_command.is_some() {
        return Err(conflict(&format!("--fill-command with --method {tag}")));
    }
    if cfg.method != Method::Dict && cfg.dictionary.is_some() {
        return Err(conflict(&format!("--dict with --method {tag}")));
    }
    if dict_required && cfg.method == Method::Dict && cfg.dictionary.is_none() {
        return Err(Error::Config("--method dict needs --dict here".into()));
    }
    Ok(())
}

/// The inpainter for `cfg.method`; a missing dictionary is learned from the
/// undamaged part of `self_similar` when that is given.
fn inpainter(
    cfg: &RunConfig,
    self_similar: Option<(&Mesh, &InpaintConfig)>,
) -> Result<Option<Box<dyn PatchInpainter>>, Error> {
    Ok(match cfg.method {
        Method::Baseline => None,
        Method::Dict => {
            let d = match (&cfg.dictionary, self_similar) {
                (Some(path), _) => load_dict(path)?,
                (None, Some((mesh, ic))) => learn_self_similar(mesh, ic, &cfg.ksvd_options())?.0,
                (None, None) => return Err(Error::Config("--method dict needs --dict".into())),
            };
            Some(Box::new(DictionaryInpainter::new(d, cfg.sparsity)))
        }
        Method::CnnStub => Some(Box::new(StubInpainter)),
        Method::CnnFile => {
            let cmd = cfg.fill_command.as_deref().unwrap_or_default();
            Some(Box::new(ExternalInpainter::from_command_line(cmd)?))
        }
    })
}

fn score(mesh: &Mesh, reference: &Mesh, summary: &mut Value) -> Result<(), Error> {
    let d = cloud_to_mesh(&mesh.vertices, reference)?;
    let diag = reference.bounding_box().diagonal();
    summary["mean_distance"] = json!(d.mean);
    summary["rms_distance"] = json!(d.rms);
    summary["max_distance"] = json!(d.max);
    summary["psnr"] = json!(psnr_from_rms(diag, d.rms));
    if mesh.vertices.len() == reference.vertices.len() {
        let e = mesh
            .vertices
            .iter()
            .zip(&reference.vertices)
            .map(|(a, b)| (a - b).norm())
            .sum::<f64>()
            / mesh.vertices.len() as f64;
        summary["mean_vertex_error"] = json!(e);
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}
