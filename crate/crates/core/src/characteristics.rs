//! Integral curves of projected vector fields.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::algebra::{GroupPoint, StepTwoAlgebra};
use crate::error::{check_len, Error, Result};
use crate::fields::ProjectedField;
use crate::free::project_pi_w;
use crate::graphs::{p_q_map, ScalarField};

/// A sampled integral curve through `base`.
///
/// `times` increase through `[-T_back, T_fwd]`; `times[origin] == 0` and
/// `states[origin] == base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Characteristic {
    pub j: usize,
    pub base: Vec<f64>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub origin: usize,
    pub step: f64,
    pub method: String,
}

const METHOD: &str = "rk4";

impl Characteristic {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Samples with `t ≥ 0`, starting at the base point.
    pub fn forward(&self) -> (&[f64], &[Vec<f64>]) {
        (&self.times[self.origin..], &self.states[self.origin..])
    }

    /// State at an arbitrary time by four-point Lagrange interpolation.
    pub fn sample(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let (t0, t1) = (self.times[0], self.times[n - 1]);
        if !(t >= t0 - 1e-12 && t <= t1 + 1e-12) {
            return Err(Error::InvalidArgument(format!("time {t} outside [{t0}, {t1}]")));
        }
        if n < 4 {
            let k = self.times.partition_point(|s| *s < t).min(n - 1);
            return Ok(self.states[k].clone());
        }
        let k = self.times.partition_point(|s| *s <= t).clamp(2, n - 2) - 2;
        let idx = [k, k + 1, k + 2, k + 3];
        let mut out = vec![0.0; self.dim()];
        for &a in &idx {
            let mut w = 1.0;
            for &b in &idx {
                if a != b {
                    w *= (t - self.times[b]) / (self.times[a] - self.times[b]);
                }
            }
            for (o, s) in out.iter_mut().zip(&self.states[a]) {
                *o += w * s;
            }
        }
        Ok(out)
    }

    /// Fails with the first sample outside the field's domain.
    pub fn ensure_within(&self, field: &ScalarField) -> Result<()> {
        for (t, s) in self.times.iter().zip(&self.states) {
            if field.eval(s).is_err() {
                return Err(Error::DomainExit {
                    time: *t,
                    partial: Box::new(self.clone()),
                });
            }
        }
        Ok(())
    }

    /// CSV with columns `t, w1, …, wd`.
    pub fn write_csv<W: Write>(&self, out: W, names: Option<&[String]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_owned()];
        match names {
            Some(n) => {
                check_len(self.dim(), n.len())?;
                header.extend(n.iter().cloned());
            }
            None => header.extend((1..=self.dim()).map(|k| format!("w{k}"))),
        }
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut rec = vec![format!("{t}")];
            rec.extend(s.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Classical RK4 through `a` over `[-horizon, horizon]` with nominal step `h`.
///
/// The driven slot is set to `a_j + t` and every uncoupled slot to
/// `a_k + c_k t` exactly; only the coupled slots carry solver error.
pub fn integrate(field: &dyn ProjectedField, a: &[f64], horizon: f64, h: f64) -> Result<Characteristic> {
    integrate_span(field, a, horizon, horizon, h)
}

/// As [`integrate`], over `[-back, fwd]`.
pub fn integrate_span(field: &dyn ProjectedField, a: &[f64], back: f64, fwd: f64, h: f64) -> Result<Characteristic> {
    check_len(field.dim(), a.len())?;
    if !(h > 0.0) || !(back >= 0.0) || !(fwd >= 0.0) || !(back + fwd > 0.0) {
        return Err(Error::InvalidArgument(format!("need h > 0 and a nonempty span, got h = {h}, [-{back}, {fwd}]")));
    }
    let v0 = field.velocity_vec(a)?;
    let coupled = field.coupled_slots();
    let driven = field.driven_slot();
    let rates: Vec<Option<f64>> = (0..a.len())
        .map(|k| if k == driven { Some(1.0) } else if coupled[k] { None } else { Some(v0[k]) })
        .collect();

    let mut curve = Characteristic {
        j: field.index(),
        base: a.to_vec(),
        times: vec![0.0],
        states: vec![a.to_vec()],
        origin: 0,
        step: h,
        method: METHOD.to_owned(),
    };

    let n_fwd = (fwd / h).ceil() as usize;
    let n_back = (back / h).ceil() as usize;
    let mut fwd_part = Vec::new();
    let mut back_part = Vec::new();
    let fwd_res = march(field, a, &rates, fwd, n_fwd, &mut fwd_part);
    let res = fwd_res.and_then(|()| march(field, a, &rates, -back, n_back, &mut back_part));

    back_part.reverse();
    curve.origin = back_part.len();
    let (bt, bs): (Vec<f64>, Vec<Vec<f64>>) = back_part.into_iter().unzip();
    let (ft, fs): (Vec<f64>, Vec<Vec<f64>>) = fwd_part.into_iter().unzip();
    curve.times = bt.into_iter().chain(std::iter::once(0.0)).chain(ft).collect();
    curve.states = bs.into_iter().chain(std::iter::once(a.to_vec())).chain(fs).collect();

    match res {
        Ok(()) => Ok(curve),
        Err(Error::DomainExit { time, .. }) => Err(Error::DomainExit {
            time,
            partial: Box::new(curve),
        }),
        Err(e) => Err(e),
    }
}

fn march(
    field: &dyn ProjectedField,
    a: &[f64],
    rates: &[Option<f64>],
    span: f64,
    steps: usize,
    out: &mut Vec<(f64, Vec<f64>)>,
) -> Result<()> {
    if steps == 0 {
        return Ok(());
    }
    let d = a.len();
    let dt = span / steps as f64;
    let mut y = a.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut tmp = vec![0.0; d];
    let eval = |w: &[f64], out: &mut [f64], t: f64| -> Result<()> {
        field.velocity(w, out).map_err(|e| match e {
            Error::OutsideDomain { .. } => Error::DomainExit {
                time: t,
                partial: Box::default(),
            },
            other => other,
        })
    };
    for s in 0..steps {
        let t = s as f64 * dt;
        eval(&y, &mut k1, t)?;
        for k in 0..d {
            tmp[k] = y[k] + 0.5 * dt * k1[k];
        }
        eval(&tmp, &mut k2, t + 0.5 * dt)?;
        for k in 0..d {
            tmp[k] = y[k] + 0.5 * dt * k2[k];
        }
        eval(&tmp, &mut k3, t + 0.5 * dt)?;
        for k in 0..d {
            tmp[k] = y[k] + dt * k3[k];
        }
        eval(&tmp, &mut k4, t + dt)?;
        let t1 = (s + 1) as f64 * dt;
        for k in 0..d {
            y[k] = match rates[k] {
                Some(c) => a[k] + c * t1,
                None => y[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]),
            };
        }
        if field.graph().eval(&y).is_err() {
            return Err(Error::DomainExit {
                time: t1,
                partial: Box::default(),
            });
        }
        out.push((t1, y.clone()));
    }
    Ok(())
}

impl Default for Characteristic {
    fn default() -> Self {
        Self {
            j: 0,
            base: Vec::new(),
            times: Vec::new(),
            states: Vec::new(),
            origin: 0,
            step: 0.0,
            method: METHOD.to_owned(),
        }
    }
}

/// `γ_q(t) = P_q(γ(t))`.
pub fn translate_curve(a: &StepTwoAlgebra, gamma: &Characteristic, q: &GroupPoint) -> Result<Characteristic> {
    check_len(a.w_dim(), gamma.dim())?;
    let map = p_q_map(a, q)?;
    Ok(Characteristic {
        base: map.apply_vec(&gamma.base),
        states: gamma.states.iter().map(|s| map.apply_vec(s)).collect(),
        ..gamma.clone()
    })
}

/// Applies `π` to every state of a free-group curve.
pub fn project_curve(a: &StepTwoAlgebra, gamma_f: &Characteristic) -> Result<Characteristic> {
    Ok(Characteristic {
        base: project_pi_w(a, &gamma_f.base)?,
        states: gamma_f.states.iter().map(|s| project_pi_w(a, s)).collect::<Result<_>>()?,
        ..gamma_f.clone()
    })
}
