//! Browser bindings: light-cone formulas, the SLE_κ(ρ) phase diagram and a
//! sampled SLE trace, all returned as strings for the page to insert.

use std::f64::consts::PI;

use igsim::driver::sample_sle;
use igsim::formulas::{capped_dimension, classify_phase, critical_angle, ig_constants, lightcone_dimension};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest trace the page may request; the zipper is quadratic in the steps.
pub const MAX_TRACE_STEPS: usize = 20_000;

pub fn formulas_json(kappa: f64, theta: f64) -> Result<String, String> {
    let c = ig_constants(kappa).map_err(|e| e.to_string())?;
    let d = lightcone_dimension(kappa, theta).map_err(|e| e.to_string())?;
    let rho = theta * (kappa / 2.0 - 2.0) / PI - 2.0;
    let rec = classify_phase(kappa, rho).map_err(|e| e.to_string())?;
    let v = json!({
        "kappa": kappa,
        "theta": theta,
        "dimension": capped_dimension(d),
        "dimension_uncapped": d,
        "rho": rho,
        "bessel_dim": rec.bessel_dim,
        "phase": rec.phase.name(),
        "kappa_prime": c.kappa_prime,
        "chi": c.chi,
        "lambda": c.lambda,
        "lambda_prime": c.lambda_prime,
        "theta_c": critical_angle(kappa).map_err(|e| e.to_string())?,
    });
    Ok(v.to_string())
}

pub fn phase_svg(kappa_steps: usize, rho_steps: usize) -> Result<String, String> {
    if !(1..=400).contains(&kappa_steps) || !(1..=400).contains(&rho_steps) {
        return Err("grid sizes must lie in 1..=400".into());
    }
    igsim::svg::phase_diagram(kappa_steps, rho_steps, -6.0, 2.0).map_err(|e| e.to_string())
}

pub fn trace_svg(kappa: f64, steps: usize, seed: u64) -> Result<String, String> {
    if !(2..=MAX_TRACE_STEPS).contains(&steps) {
        return Err(format!("steps must lie in 2..={MAX_TRACE_STEPS}"));
    }
    let d = sample_sle(kappa, steps, 1.0 / steps as f64, seed).map_err(|e| e.to_string())?;
    let line = d.chain().and_then(|c| c.trace()).map_err(|e| e.to_string())?;
    let pts: Vec<[f64; 2]> = line.points.iter().map(|p| [p.x, p.y]).collect();
    let title = format!("SLE trace, kappa = {kappa}, seed {seed}");
    igsim::svg::curves(&title, &[(&pts, None)], None).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn formulas(kappa: f64, theta: f64) -> Result<String, JsError> {
    formulas_json(kappa, theta).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn phase_diagram(kappa_steps: usize, rho_steps: usize) -> Result<String, JsError> {
    phase_svg(kappa_steps, rho_steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sle_trace(kappa: f64, steps: usize, seed: u64) -> Result<String, JsError> {
    trace_svg(kappa, steps, seed).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas_at_kappa_two_quarter_turn() {
        let v: serde_json::Value = serde_json::from_str(&formulas_json(2.0, PI / 2.0).unwrap()).unwrap();
        assert_eq!(v["dimension"], 1.6875);
        assert_eq!(v["rho"], -2.5);
        assert_eq!(v["phase"], "light-cone");
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(formulas_json(5.0, 0.0).is_err());
        assert!(formulas_json(2.0, 4.0).is_err());
        assert!(phase_svg(0, 10).is_err());
        assert!(trace_svg(2.0, MAX_TRACE_STEPS + 1, 1).is_err());
    }

    #[test]
    fn svgs_are_deterministic() {
        assert!(phase_svg(20, 20).unwrap().contains("<svg"));
        let a = trace_svg(3.0, 500, 9).unwrap();
        assert_eq!(a, trace_svg(3.0, 500, 9).unwrap());
        assert_ne!(a, trace_svg(3.0, 500, 10).unwrap());
    }
}
