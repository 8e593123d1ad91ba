use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use nvdress::analysis::{
    fit_t2, loglog_slope, loglog_transform, normalize_extrinsic, powerlaw_tail, sensitivity_report, stretched_value,
    Breakdown, LinearFit, PowerLawFit, SensitivityReport, T2Result,
};
use nvdress::dressed::{effective_couplings, mixing_angle, moment_difference, qubit_splitting, su2_field, NvConstants};
use nvdress::ensemble::{
    coupling_matrix, coupling_matrix_onaxis, default_disorder_width, sample_disorder, sample_geometry, CouplingMatrix, EnsembleGeometry,
    FieldConfig,
};
use nvdress::manybody::{
    ac_magnetometry, contrast_period, disorder_order_protocol, global_decay_protocol, rabi_simulation, Encoding,
    MagnetometrySpec, ProtocolKind, ProtocolSpec, RabiSpec, TimeSeries,
};
use nvdress::rng;
use nvdress::sequence::{
    average_hamiltonian, builtin_sequence, effective_field_ratio, parse_sequence_file, toggling_frames,
    write_sequence_file, Builtin, CouplingVector, PulseSequence,
};

use crate::config::RunConfig;
use crate::output::{verify, RunManifest, RunOutput, MANIFEST};
use crate::plot::{self, Curve};
use crate::{BuiltinArg, CliError, ConfigArg, CouplingsArgs, FitArgs, GlobalOpts, Model, ReportArgs, SequenceArgs};

pub const OUT_ENV: &str = "NVDRESS_OUT";
const DEFAULT_OUT: &str = "nvdress-out";

fn parse_range(s: &str, parts: usize) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = s
        .split(':')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Validation(format!("cannot parse `{s}` as {parts} colon-separated numbers")))?;
    if v.len() != parts {
        return Err(CliError::Validation(format!("`{s}` needs {parts} colon-separated numbers")));
    }
    Ok(v)
}

fn window(s: &Option<String>) -> Result<Option<(f64, f64)>, CliError> {
    s.as_ref()
        .map(|w| parse_range(w, 2).map(|v| (v[0], v[1])))
        .transpose()
}

/// Config with command-line overrides applied, plus the directory relative
/// paths resolve against.
fn load_config(path: &Path, global: &GlobalOpts) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &global.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn geometry_for(cfg: &RunConfig, base: &Path) -> Result<EnsembleGeometry, CliError> {
    Ok(match &cfg.geometry.positions_csv {
        Some(p) => {
            let file = fs::File::open(base.join(p))?;
            EnsembleGeometry::read_csv(file, cfg.field.direction()?, cfg.field.b_gauss(), cfg.seed)?
        }
        None => sample_geometry(&cfg.field, &cfg.geometry.sampling, cfg.seed)?,
    })
}

fn couplings_for(cfg: &RunConfig, geom: &EnsembleGeometry) -> Result<CouplingMatrix, CliError> {
    Ok(match cfg.field {
        FieldConfig::Onaxis { .. } => coupling_matrix_onaxis(geom, &cfg.constants)?,
        _ => coupling_matrix(geom, &cfg.constants)?,
    })
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> nvdress::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn json_bytes(v: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

#[derive(Serialize)]
struct CouplingRow {
    b_gauss: f64,
    alpha_rad: f64,
    g_xy: f64,
    g_zz: f64,
    lambda: f64,
    j0_mhz_nm3: f64,
    trace: f64,
    delta_mu: f64,
    splitting_mhz: f64,
}

fn coupling_row(b: f64, c: &NvConstants) -> Result<CouplingRow, CliError> {
    let e = effective_couplings(b, c)?;
    Ok(CouplingRow {
        b_gauss: b,
        alpha_rad: mixing_angle(b, c),
        g_xy: e.g_xy,
        g_zz: e.g_zz,
        lambda: e.lambda,
        j0_mhz_nm3: e.j0,
        trace: e.trace,
        delta_mu: moment_difference(b, c)?,
        splitting_mhz: qubit_splitting(b, c),
    })
}

pub fn couplings(a: &CouplingsArgs) -> Result<(), CliError> {
    let c = match &a.config {
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            cfg.constants.validate()?;
            cfg.constants
        }
        None => NvConstants::default(),
    };
    if a.su2 {
        let b = su2_field(&c);
        if a.json {
            println!("{}", json!({ "su2_field_gauss": b }));
        } else {
            println!("SU(2) field: {b:.2} G");
        }
        return Ok(());
    }
    if let Some(s) = &a.sweep {
        let v = parse_range(s, 3)?;
        let n = v[2] as usize;
        if n < 2 || v[2].fract() != 0.0 || !(v[1] > v[0]) || v[0] < 0.0 {
            return Err(CliError::Validation("sweep needs 0 ≤ start < stop and an integer count ≥ 2".into()));
        }
        let mut w = csv::Writer::from_writer(std::io::stdout().lock());
        for k in 0..n {
            let b = v[0] + (v[1] - v[0]) * k as f64 / (n - 1) as f64;
            w.serialize(coupling_row(b, &c)?).map_err(|e| CliError::Validation(e.to_string()))?;
        }
        w.flush()?;
        return Ok(());
    }
    let b = a.field.ok_or_else(|| CliError::Validation("one of --field, --su2 or --sweep is required".into()))?;
    let row = coupling_row(b, &c)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&row)?);
    } else {
        println!("B⊥            {:>12.4} G", row.b_gauss);
        println!("α             {:>12.6} rad", row.alpha_rad);
        println!("g_xy          {:>12.6}", row.g_xy);
        println!("g_zz          {:>12.6}", row.g_zz);
        println!("λ             {:>12.6}", row.lambda);
        println!("J₀            {:>12.4} MHz·nm³", row.j0_mhz_nm3);
        println!("trace         {:>12.6}", row.trace);
        println!("Δμ            {:>12.6}", row.delta_mu);
        println!("splitting     {:>12.4} MHz", row.splitting_mhz);
    }
    Ok(())
}

pub fn geometry(a: &ConfigArg, global: &GlobalOpts) -> Result<(), CliError> {
    let (cfg, base) = load_config(&a.config, global)?;
    let mut geom = geometry_for(&cfg, &base)?;
    if let Some(w) = cfg.protocol.as_ref().and_then(|p| p.disorder_width) {
        let dist = cfg.protocol.as_ref().map(|p| p.disorder_distribution).unwrap_or_default();
        geom.h = sample_disorder(geom.len(), w, dist, &mut rng::stream(cfg.seed, rng::purpose::DISORDER))?;
    }
    let cm = couplings_for(&cfg, &geom)?;
    let mut out = RunOutput::create(&output_dir(&cfg))?;
    out.write("geometry.csv", &csv_bytes(|b| geom.write_csv(b))?)?;
    let mut pairs = String::from("i,j,j_mhz\n");
    for i in 0..cm.len() {
        for j in (i + 1)..cm.len() {
            let _ = writeln!(pairs, "{i},{j},{}", cm.j[(i, j)]);
        }
    }
    out.write("couplings.csv", pairs.as_bytes())?;
    let summary = json!({
        "n_spins": geom.len(),
        "min_distance_nm": if geom.len() > 1 { json!(geom.min_distance()) } else { json!(null) },
        "g": cm.g,
        "typical_coupling_mhz": cm.typical_coupling(),
    });
    out.write("summary.json", &json_bytes(&summary)?)?;
    let dir = out.dir().to_path_buf();
    out.finish("geometry", &cfg)?;
    println!("{} spins written to {}", geom.len(), dir.display());
    Ok(())
}

fn parse_native(s: &Option<String>) -> Result<[f64; 3], CliError> {
    match s {
        None => {
            let v = nvdress::dressed::onaxis_couplings()?.native_vector();
            Ok([v.x, v.y, v.z])
        }
        Some(s) => {
            let v: Vec<f64> = s
                .split(',')
                .map(|x| x.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| CliError::Validation(format!("--native expects gx,gy,gz, got `{s}`")))?;
            <[f64; 3]>::try_from(v).map_err(|_| CliError::Validation("--native expects three numbers".into()))
        }
    }
}

pub fn sequence(a: &SequenceArgs) -> Result<(), CliError> {
    let seq: PulseSequence = match (&a.builtin, &a.file) {
        (Some(b), None) => {
            let which = match b {
                BuiltinArg::Xy8 => Builtin::Xy8,
                BuiltinArg::Cxy8 => Builtin::Cxy8,
                BuiltinArg::BalancedSu2 => Builtin::BalancedSu2,
                BuiltinArg::Su2Echo => Builtin::Su2Echo,
            };
            builtin_sequence(which, a.tau)?
        }
        (None, Some(p)) => parse_sequence_file(p)?,
        _ => return Err(CliError::Validation("give exactly one of --builtin or --file".into())),
    };
    let native = parse_native(&a.native)?;
    let frames = toggling_frames(&seq)?;
    let avg = average_hamiltonian(&CouplingVector::new(native), &frames)?;
    let ratio = effective_field_ratio(&seq)?;
    if let Some(p) = &a.write {
        write_sequence_file(&seq, p)?;
    }
    let info = json!({
        "name": seq.name,
        "period_us": seq.period(),
        "pulses": seq.pulse_count(),
        "pi_pulses": seq.pi_pulse_count(),
        "cyclic": seq.is_cyclic(),
        "frames": frames.frames.len(),
        "native_g": native,
        "average_g": avg.coupling.g,
        "off_diagonal_residual": avg.off_diagonal_residual,
        "effective_field_ratio": ratio,
    });
    if a.json {
        println!("{}", serde_json::to_string_pretty(&info)?);
    } else {
        println!("sequence          {}", seq.name);
        println!("period            {:.6} μs", seq.period());
        println!("pulses            {} ({} π)", seq.pulse_count(), seq.pi_pulse_count());
        println!("cyclic            {}", seq.is_cyclic());
        println!("frames            {}", frames.frames.len());
        println!("native g          {native:.6?}");
        println!("average g         {:.6?}", avg.coupling.g);
        println!("field ratio       {ratio:.6}");
    }
    Ok(())
}

fn simulate_protocol(cfg: &RunConfig, spec: &ProtocolSpec, base: &Path, out: &mut RunOutput) -> Result<TimeSeries, CliError> {
    Ok(match spec.kind {
        ProtocolKind::DisorderOrderXx | ProtocolKind::DisorderOrderZz | ProtocolKind::GlobalDecay => {
            let geom = geometry_for(cfg, base)?;
            let cm = couplings_for(cfg, &geom)?;
            out.write("geometry.csv", &csv_bytes(|b| geom.write_csv(b))?)?;
            if spec.kind == ProtocolKind::GlobalDecay {
                global_decay_protocol(spec, &geom, &cm)?
            } else {
                disorder_order_protocol(spec, &geom, &cm)?
            }
        }
        ProtocolKind::Rabi => {
            let r = cfg.rabi.as_ref().ok_or_else(|| CliError::Validation("rabi protocol needs a `rabi` section".into()))?;
            let res = rabi_simulation(
                &RabiSpec {
                    field: cfg.field.clone(),
                    drive_mhz: r.drive_mhz,
                    drive_direction: r.drive_direction,
                    time_grid: spec.time_grid.clone(),
                },
                &cfg.constants,
            )?;
            for (g, ts) in cfg.field.groups().iter().zip(&res.per_group) {
                out.write(&format!("series_group{g}.csv"), &csv_bytes(|b| ts.write_csv(b))?)?;
            }
            res.series
        }
        ProtocolKind::AcMagnetometry => unreachable!("handled by the caller"),
    })
}

pub fn simulate(a: &ConfigArg, global: &GlobalOpts) -> Result<(), CliError> {
    let (cfg, base) = load_config(&a.config, global)?;
    let mut spec = cfg.protocol.clone().ok_or_else(|| CliError::Validation("config has no `protocol` section".into()))?;
    spec.seed = cfg.seed;
    if let Some(s) = &cfg.sequence {
        spec.sequence = Some(s.load(&base)?);
    }
    if matches!(spec.kind, ProtocolKind::DisorderOrderXx | ProtocolKind::DisorderOrderZz) && spec.disorder_width.is_none() {
        let j0 = effective_couplings(cfg.field.b_gauss(), &cfg.constants)?.j0;
        let w = default_disorder_width(j0, cfg.geometry.sampling.density);
        log::info!("disorder_width defaulted to {w:.4} MHz");
        spec.disorder_width = Some(w);
    }
    spec.validate()?;
    let mut out = RunOutput::create(&output_dir(&cfg))?;

    if spec.kind == ProtocolKind::AcMagnetometry {
        let m = cfg
            .magnetometry
            .as_ref()
            .ok_or_else(|| CliError::Validation("ac_magnetometry needs a `magnetometry` section".into()))?;
        let curve = ac_magnetometry(m, &cfg.constants, None)?;
        out.write("contrast.csv", &csv_bytes(|b| curve.write_csv(b))?)?;
        if global.svg {
            let doc = plot::svg("AC magnetometry", "B_ac (G)", "contrast", &[Curve::line("contrast", &curve.b_ac_gauss, &curve.contrast)])?;
            out.write("contrast.svg", doc.as_bytes())?;
        }
        let dir = out.dir().to_path_buf();
        out.finish("simulate", &cfg)?;
        println!("contrast curve written to {}", dir.display());
        return Ok(());
    }

    let mut ts = simulate_protocol(&cfg, &spec, &base, &mut out)?;
    if let Some(r) = &cfg.analysis.reference_csv {
        let reference = TimeSeries::read_csv(fs::File::open(base.join(r))?)?;
        ts = normalize_extrinsic(&ts, &reference)?;
    }
    out.write("series.csv", &csv_bytes(|b| ts.write_csv(b))?)?;
    out.write("metadata.json", &json_bytes(&ts.metadata)?)?;

    let mut fit: Option<T2Result> = None;
    if cfg.analysis.fit {
        let j0_rho = effective_couplings(cfg.field.b_gauss(), &cfg.constants)?.j0 * cfg.geometry.sampling.density;
        let r = fit_t2(&ts, cfg.analysis.floor, Some(j0_rho))?;
        out.write("fit.json", &json_bytes(&r)?)?;
        fit = Some(r);
    }
    if global.svg {
        let mut curves = vec![Curve::markers("simulation", &ts.t, &ts.value)];
        let fitted: Vec<f64>;
        if let Some(r) = &fit {
            fitted = ts.t.iter().map(|&t| stretched_value(&r.fit, t)).collect();
            curves.push(Curve::line("stretched exponential", &ts.t, &fitted));
        }
        let doc = plot::svg(&format!("{:?}", spec.kind), "t (μs)", "signal", &curves)?;
        out.write("series.svg", doc.as_bytes())?;
    }
    let dir = out.dir().to_path_buf();
    out.finish("simulate", &cfg)?;
    println!("{} points written to {}", ts.len(), dir.display());
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum FitOutput {
    Stretched(T2Result),
    Powerlaw(PowerLawFit),
    Loglog { beta: f64, beta_stderr: f64, window: Option<(f64, f64)>, fit: LinearFit },
}

pub fn fit(a: &FitArgs, global: &GlobalOpts) -> Result<(), CliError> {
    let file = fs::File::open(&a.input).map_err(|e| CliError::Validation(format!("{}: {e}", a.input.display())))?;
    let ts = TimeSeries::read_csv(file)?;
    let win = window(&a.window)?;
    let (result, doc) = match a.model {
        Model::Stretched => {
            let r = fit_t2(&ts, a.floor, a.j0_rho)?;
            let fitted: Vec<f64> = ts.t.iter().map(|&t| stretched_value(&r.fit, t)).collect();
            let doc = plot::svg(
                "stretched exponential",
                "t (μs)",
                "C",
                &[Curve::markers("data", &ts.t, &ts.value), Curve::line("fit", &ts.t, &fitted)],
            );
            (FitOutput::Stretched(r), doc)
        }
        Model::Powerlaw => {
            let w = win.ok_or_else(|| CliError::Validation("--model powerlaw needs --window a:b".into()))?;
            let r = powerlaw_tail(&ts, w)?;
            let pts: Vec<(f64, f64)> =
                ts.t.iter().zip(&ts.value).filter(|(t, v)| **t > 0.0 && **v > 0.0).map(|(t, v)| (t.ln(), v.ln())).collect();
            let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            let line: Vec<f64> = lx.iter().map(|x| r.prefactor.ln() + r.exponent * x).collect();
            let doc = plot::svg("power-law tail", "ln t", "ln C", &[Curve::markers("data", &lx, &ly), Curve::line("fit", &lx, &line)]);
            (FitOutput::Powerlaw(r), doc)
        }
        Model::Loglog => {
            let w = win.unwrap_or((0.0, f64::INFINITY));
            let r = loglog_slope(&ts, w)?;
            let tr = loglog_transform(&ts);
            let line: Vec<f64> = tr.x.iter().map(|x| r.intercept + r.slope * x).collect();
            let doc = plot::svg("loglog-log view", "ln t", "ln(−ln C)", &[Curve::markers("data", &tr.x, &tr.y), Curve::line("fit", &tr.x, &line)]);
            (FitOutput::Loglog { beta: r.slope, beta_stderr: r.slope_stderr, window: win, fit: r }, doc)
        }
    };
    let text = serde_json::to_string_pretty(&result)?;
    println!("{text}");
    if let Some(p) = &a.output {
        fs::write(p, format!("{text}\n"))?;
    }
    if global.svg {
        let svg_path = match &a.output {
            Some(p) => p.with_extension("svg"),
            None => a.input.with_extension("fit.svg"),
        };
        fs::write(svg_path, doc?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SenseOutput {
    t_phase_us: f64,
    volume_um3: f64,
    periods_gauss: serde_json::Map<String, serde_json::Value>,
    /// Simulated contrast-period ratios: Floquet on-axis over native on-axis,
    /// and native on-axis over perpendicular.
    period_ratios: serde_json::Value,
    breakdown: Breakdown,
    reports: Vec<SensitivityReport>,
    /// η(Floquet on-axis) / η(perpendicular two-group) from the simulated
    /// curves.
    simulated_enhancement: f64,
}

fn encoding_name(e: Encoding) -> &'static str {
    match e {
        Encoding::Onaxis => "onaxis",
        Encoding::OnaxisDroidLike => "onaxis_droid_like",
        Encoding::PerpendicularTwoGroup => "perpendicular_two_group",
    }
}

pub fn sense(a: &ConfigArg, global: &GlobalOpts) -> Result<(), CliError> {
    let (cfg, _) = load_config(&a.config, global)?;
    let template = cfg.magnetometry.clone().unwrap_or_else(|| MagnetometrySpec::new(Encoding::PerpendicularTwoGroup));
    let s = &cfg.sensitivity;
    let breakdown = Breakdown::compute(&cfg.constants, s.contrast_ratio, s.overhead_ratio)?;
    let mut out = RunOutput::create(&output_dir(&cfg))?;
    let mut periods = serde_json::Map::new();
    let mut reports = vec![];
    let mut curves = vec![];
    for enc in Encoding::ALL {
        let mut spec = MagnetometrySpec { encoding: enc, sequence: None, ..template.clone() };
        let period = if spec.b_ac_grid.is_empty() {
            let p = contrast_period(&spec, &cfg.constants)?;
            let n = s.grid_points.max(2);
            spec.b_ac_grid = (0..n).map(|k| 0.5 * p * k as f64 / (n - 1) as f64).collect();
            Some(p)
        } else {
            contrast_period(&spec, &cfg.constants).ok()
        };
        periods.insert(encoding_name(enc).into(), json!(period));
        let curve = ac_magnetometry(&spec, &cfg.constants, None)?;
        out.write(&format!("contrast_{}.csv", encoding_name(enc)), &csv_bytes(|b| curve.write_csv(b))?)?;
        reports.push(sensitivity_report(&curve, enc, spec.t_phase, &s.readout, breakdown.clone())?);
        curves.push((enc, curve));
    }
    let p = |e: Encoding| periods[encoding_name(e)].as_f64();
    let ratios = match (p(Encoding::Onaxis), p(Encoding::OnaxisDroidLike), p(Encoding::PerpendicularTwoGroup)) {
        (Some(on), Some(droid), Some(perp)) => json!({ "floquet_over_native": droid / on, "native_over_perpendicular": on / perp }),
        _ => json!(null),
    };
    let report = SenseOutput {
        t_phase_us: template.t_phase,
        volume_um3: s.readout.volume_um3,
        periods_gauss: periods,
        period_ratios: ratios,
        simulated_enhancement: reports[1].eta / reports[2].eta,
        breakdown,
        reports,
    };
    let bytes = json_bytes(&report)?;
    out.write("sensitivity.json", &bytes)?;
    if global.svg {
        let c: Vec<Curve> = curves.iter().map(|(e, cv)| Curve::line(encoding_name(*e), &cv.b_ac_gauss, &cv.contrast)).collect();
        out.write("contrast.svg", plot::svg("contrast vs AC amplitude", "B_ac (G)", "contrast", &c)?.as_bytes())?;
    }
    out.finish("sense", &cfg)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let path = a.dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    println!("command       {}", manifest.command);
    println!("version       {}", manifest.code_version);
    println!("wall time     {:.2} s", manifest.wall_time_s);
    if let Some(seed) = manifest.config.get("seed") {
        println!("seed          {seed}");
    }
    let checks = verify(&a.dir, &manifest);
    for (file, ok) in &checks {
        println!("  {:<28} {}", file, if *ok { "ok" } else { "CHECKSUM MISMATCH" });
    }
    let series = a.dir.join("series.csv");
    if series.exists() {
        let ts = TimeSeries::read_csv(fs::File::open(&series)?)?;
        println!("series        {} points, t ∈ [{}, {}] μs", ts.len(), ts.t[0], ts.t[ts.len() - 1]);
        match fit_t2(&ts, nvdress::analysis::DEFAULT_FLOOR, None) {
            Ok(r) => println!(
                "T₂            {:.4} ± {:.4} μs (β = {:.3})",
                r.t2,
                r.t2_stderr,
                r.fit.value("beta")
            ),
            Err(e) => println!("T₂            not fitted ({e})"),
        }
    }
    if checks.iter().any(|(_, ok)| !ok) {
        return Err(CliError::Validation("outputs do not match the manifest".into()));
    }
    Ok(())
}
