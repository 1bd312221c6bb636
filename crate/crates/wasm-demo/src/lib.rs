//! Browser bindings: solve a planar landmark transport, warp a grid by the
//! resulting bisection and push single points through it.

use groupoid_transit::flows::GeneratorFamily;
use groupoid_transit::symplectic::solve_symplectic_with_options;
use groupoid_transit::transitivity::{solve_with_options, SolveOptions};
use groupoid_transit::{Certificate, GroupoidInstance, TransitivityProblem};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Audit grids are smaller than the CLI defaults to keep the page responsive.
const DEMO_AUDIT: SolveOptions = SolveOptions {
    audit_grid: 16,
    record_trace: true,
    defect_grid: 12,
};

fn points(flat: &[f64]) -> Result<Vec<Vec<f64>>, String> {
    if flat.len() % 2 != 0 {
        return Err(format!("expected x, y pairs, got {} numbers", flat.len()));
    }
    Ok(flat.chunks(2).map(|c| c.to_vec()).collect())
}

fn certificate(json: &str) -> Result<Certificate, String> {
    serde_json::from_str(json).map_err(|e| format!("certificate: {e}"))
}

/// Solves `from[i] ↦ to[i]` in the plane and returns
/// `{"certificate": …, "paths": [[x0, y0, x1, y1, …], …]}` where each path
/// lists one landmark's position after every continuation step.
pub fn solve_json(from: &[f64], to: &[f64], symplectic: bool, seed: u64) -> Result<String, String> {
    let from = points(from)?;
    let to = points(to)?;
    if from.len() != to.len() {
        return Err(format!("{} start points but {} targets", from.len(), to.len()));
    }
    let instance = if symplectic {
        GroupoidInstance::symplectic_pair(2)
    } else {
        GroupoidInstance::pair(2)
    };
    let targets = from
        .iter()
        .zip(&to)
        .map(|(x, y)| instance.arrow_from_fiber(x, y))
        .collect();
    let mut p = TransitivityProblem::new(instance, from, targets).with_seed(seed);
    if symplectic {
        p = p.with_mode(GeneratorFamily::Symplectic);
    }
    let outcome = if symplectic {
        solve_symplectic_with_options(&p, &DEMO_AUDIT)
    } else {
        solve_with_options(&p, &DEMO_AUDIT)
    }
    .map_err(|e| e.to_string())?;
    let trace = outcome.trace.unwrap_or_default();
    let paths: Vec<Vec<f64>> = (0..p.n())
        .map(|i| trace.arrows.iter().flat_map(|step| step[i].target_coords()).collect())
        .collect();
    let out = json!({ "certificate": outcome.certificate, "paths": paths });
    Ok(out.to_string())
}

/// Images of a `per_axis × per_axis` grid over the box, row-major, as
/// flat `x, y` pairs.
pub fn warp_grid_flat(cert: &str, min: [f64; 2], max: [f64; 2], per_axis: usize) -> Result<Vec<f64>, String> {
    let sigma = certificate(cert)?.bisection();
    let beta = sigma.beta_map();
    let n = per_axis.max(2);
    let mut out = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let x = [
                min[0] + (max[0] - min[0]) * i as f64 / (n - 1) as f64,
                min[1] + (max[1] - min[1]) * j as f64 / (n - 1) as f64,
            ];
            out.extend(beta.eval(&x).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

/// `β(σ(x))` for one point.
pub fn transport_point(cert: &str, x: f64, y: f64) -> Result<Vec<f64>, String> {
    let sigma = certificate(cert)?.bisection();
    sigma.beta_map().eval(&[x, y]).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn solve(from: &[f64], to: &[f64], symplectic: bool, seed: u32) -> Result<String, JsError> {
    solve_json(from, to, symplectic, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn warp_grid(cert: &str, min_x: f64, min_y: f64, max_x: f64, max_y: f64, per_axis: usize) -> Result<Vec<f64>, JsError> {
    warp_grid_flat(cert, [min_x, min_y], [max_x, max_y], per_axis).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn transport(cert: &str, x: f64, y: f64) -> Result<Vec<f64>, JsError> {
    transport_point(cert, x, y).map_err(|e| JsError::new(&e))
}
