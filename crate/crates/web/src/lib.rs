//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string so the page needs no generated
//! TypeScript types.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use nvdress::dressed::{effective_couplings, su2_field as su2, NvConstants};
use nvdress::manybody::{ac_magnetometry, contrast_period, Encoding, MagnetometrySpec};
use nvdress::sequence::{average_hamiltonian, builtin_sequence, effective_field_ratio, toggling_frames, Builtin, CouplingVector};

fn js(r: nvdress::Result<Value>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

pub fn coupling_curve_value(b_max: f64, n: usize) -> nvdress::Result<Value> {
    if !(b_max > 0.0) || n < 2 {
        return Err(nvdress::Error::InvalidParameter { name: "b_max", reason: "need b_max > 0 and at least two points".into() });
    }
    let c = NvConstants::default();
    let (mut b, mut gxy, mut gzz, mut lambda) = (vec![], vec![], vec![], vec![]);
    for k in 0..n {
        let f = b_max * k as f64 / (n - 1) as f64;
        let e = effective_couplings(f, &c)?;
        b.push(f);
        gxy.push(e.g_xy);
        gzz.push(e.g_zz);
        lambda.push(e.lambda);
    }
    Ok(json!({ "b_gauss": b, "g_xy": gxy, "g_zz": gzz, "lambda": lambda, "su2_field": su2(&c) }))
}

/// Effective couplings from zero to `b_max` gauss.
#[wasm_bindgen]
pub fn coupling_curve(b_max: f64, n: usize) -> Result<String, JsError> {
    js(coupling_curve_value(b_max, n))
}

#[wasm_bindgen]
pub fn su2_field() -> f64 {
    su2(&NvConstants::default())
}

pub fn floquet_average_value(name: &str, tau: f64, g: [f64; 3]) -> nvdress::Result<Value> {
    let which: Builtin = serde_json::from_value(Value::String(name.into()))
        .map_err(|_| nvdress::Error::InvalidParameter { name: "sequence", reason: format!("unknown builtin `{name}`") })?;
    let seq = builtin_sequence(which, tau)?;
    let frames = toggling_frames(&seq)?;
    let avg = average_hamiltonian(&CouplingVector::new(g), &frames)?;
    Ok(json!({
        "name": seq.name,
        "period_us": seq.period(),
        "frames": frames.frames.len(),
        "average_g": avg.coupling.g,
        "off_diagonal_residual": avg.off_diagonal_residual,
        "field_ratio": effective_field_ratio(&seq)?,
    }))
}

/// Average Hamiltonian of a builtin sequence applied to native couplings
/// `(gx, gy, gz)`.
#[wasm_bindgen]
pub fn floquet_average(name: &str, tau: f64, gx: f64, gy: f64, gz: f64) -> Result<String, JsError> {
    js(floquet_average_value(name, tau, [gx, gy, gz]))
}

pub fn contrast_curves_value(t_phase: f64, n: usize) -> nvdress::Result<Value> {
    let c = NvConstants::default();
    let mut out = serde_json::Map::new();
    let mut b_top = 0.0f64;
    let mut specs = vec![];
    for enc in Encoding::ALL {
        let spec = MagnetometrySpec { t_phase, ..MagnetometrySpec::new(enc) };
        let period = contrast_period(&spec, &c)?;
        b_top = b_top.max(period);
        specs.push((enc, spec, period));
    }
    let grid: Vec<f64> = (0..n.max(2)).map(|k| b_top * k as f64 / (n.max(2) - 1) as f64).collect();
    for (enc, spec, period) in specs {
        let curve = ac_magnetometry(&MagnetometrySpec { b_ac_grid: grid.clone(), ..spec }, &c, None)?;
        let key = serde_json::to_value(enc).unwrap_or_default();
        out.insert(key.as_str().unwrap_or_default().to_string(), json!({ "period_gauss": period, "contrast": curve.contrast }));
    }
    Ok(json!({ "b_ac_gauss": grid, "curves": out }))
}

/// Contrast against AC amplitude for the three encodings on a shared grid
/// spanning the longest period.
#[wasm_bindgen]
pub fn contrast_curves(t_phase: f64, n: usize) -> Result<String, JsError> {
    js(contrast_curves_value(t_phase, n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_curve_crosses_heisenberg_point() {
        let v = coupling_curve_value(800.0, 81).unwrap();
        let l: Vec<f64> = serde_json::from_value(v["lambda"].clone()).unwrap();
        assert_eq!(l[0], 0.5);
        assert!(l.windows(2).all(|w| w[1] < w[0]));
        assert!(l[36] > 0.0 && l[37] < 0.0);
    }

    #[test]
    fn su2_echo_average_is_isotropic() {
        let v = floquet_average_value("su2_echo", 0.1, [-2.0, -2.0, 2.0]).unwrap();
        let g: Vec<f64> = serde_json::from_value(v["average_g"].clone()).unwrap();
        for x in g {
            assert!((x + 2.0 / 3.0).abs() < 1e-12);
        }
        assert!(floquet_average_value("nope", 0.1, [1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn contrast_periods_ordered() {
        let v = contrast_curves_value(7.2, 50).unwrap();
        let p = |k: &str| v["curves"][k]["period_gauss"].as_f64().unwrap();
        assert!((p("onaxis_droid_like") / p("onaxis") - 3f64.sqrt()).abs() < 2e-3);
        assert!(p("perpendicular_two_group") < p("onaxis"));
    }
}
