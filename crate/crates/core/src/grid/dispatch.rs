//! Droop-based generator dispatch with limit saturation.

use thiserror::Error;

/// One generator's droop parameters as seen by the dispatcher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroopUnit {
    pub setpoint: f64,
    /// MW per unit frequency deviation.
    pub gain: f64,
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    /// Frequency deviation in pu (positive: over-frequency).
    pub freq_dev: f64,
    pub gen_p: Vec<f64>,
    /// Droop response per unit, `gen_p - setpoint`.
    pub slack_share: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError {
    #[error("load {load:.3} MW exceeds available capacity {capacity:.3} MW")]
    InsufficientCapacity { load: f64, capacity: f64 },
    #[error("load {load:.3} MW below combined minimum output {minimum:.3} MW")]
    ExcessMinimum { load: f64, minimum: f64 },
    #[error("no generation available")]
    NoGeneration,
}

/// Shares the imbalance between `load` and the sum of setpoints across units in
/// proportion to their droop gains. Units pushed past a limit are pinned there
/// and the remainder is re-shared among the rest until the island balances.
pub fn dispatch_units(units: &[DroopUnit], load: f64) -> Result<DispatchSolution, DispatchError> {
    if units.is_empty() {
        return Err(DispatchError::NoGeneration);
    }
    let capacity: f64 = units.iter().map(|u| u.p_max).sum();
    let minimum: f64 = units.iter().map(|u| u.p_min).sum();
    let tol = 1e-9 * capacity.abs().max(1.0);
    if load > capacity + tol {
        return Err(DispatchError::InsufficientCapacity { load, capacity });
    }
    if load < minimum - tol {
        return Err(DispatchError::ExcessMinimum { load, minimum });
    }
    let setpoints: Vec<f64> = units
        .iter()
        .map(|u| u.setpoint.clamp(u.p_min, u.p_max))
        .collect();
    let mut pinned: Vec<Option<f64>> = vec![None; units.len()];
    let mut freq_dev = 0.0;
    let mut gen_p = setpoints.clone();
    loop {
        let mut gain = 0.0;
        let mut scheduled = 0.0;
        for (i, u) in units.iter().enumerate() {
            match pinned[i] {
                Some(p) => scheduled += p,
                None => {
                    gain += u.gain;
                    scheduled += setpoints[i];
                }
            }
        }
        if gain <= 0.0 {
            // every unit sits on a limit; feasibility was checked above
            for (i, p) in pinned.iter().enumerate() {
                gen_p[i] = p.unwrap_or(setpoints[i]);
            }
            break;
        }
        freq_dev = (scheduled - load) / gain;
        let mut violated = false;
        for (i, u) in units.iter().enumerate() {
            if pinned[i].is_some() {
                gen_p[i] = pinned[i].unwrap();
                continue;
            }
            let p = setpoints[i] - u.gain * freq_dev;
            if p > u.p_max {
                pinned[i] = Some(u.p_max);
                violated = true;
            } else if p < u.p_min {
                pinned[i] = Some(u.p_min);
                violated = true;
            }
            gen_p[i] = p;
        }
        if !violated {
            break;
        }
    }
    let slack_share = gen_p.iter().zip(&setpoints).map(|(p, s)| p - s).collect();
    Ok(DispatchSolution {
        freq_dev,
        gen_p,
        slack_share,
    })
}
