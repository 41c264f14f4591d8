//! Derivative-free simplex-reflection minimizer on unconstrained `R^d`.

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    /// Stop when the spread of simplex values falls below this.
    pub ftol: f64,
    /// ... and the simplex fits in a box of this half-width.
    pub xtol: f64,
    pub max_evals: usize,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            ftol: 1e-10,
            xtol: 1e-7,
            max_evals: 4000,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

impl NelderMead {
    /// Minimizes `f` starting from an axis-aligned simplex around `x0`.
    /// Non-finite values are treated as `+inf`.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let d = x0.len();
        let mut evals = 0;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };
        if d == 0 {
            let value = eval(x0, &mut evals);
            return Minimum {
                x: vec![],
                value,
                evals,
            };
        }
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
        pts.push(x0.to_vec());
        for i in 0..d {
            let mut p = x0.to_vec();
            p[i] += self.initial_step;
            pts.push(p);
        }
        let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();

        loop {
            let mut order: Vec<usize> = (0..=d).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
            pts = order.iter().map(|&i| pts[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();

            let spread = vals[d] - vals[0];
            let size = pts[1..]
                .iter()
                .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if (spread.abs() <= self.ftol && size <= self.xtol) || evals >= self.max_evals {
                break;
            }
            if spread.abs() <= self.ftol * 1e-3 && vals[0].is_finite() {
                // Flat to working precision; further shrinking cannot help.
                break;
            }

            let centroid: Vec<f64> = (0..d)
                .map(|j| pts[..d].iter().map(|p| p[j]).sum::<f64>() / d as f64)
                .collect();
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[d]).map(|(c, w)| c + t * (c - w)).collect() };

            let xr = along(1.0);
            let fr = eval(&xr, &mut evals);
            if fr < vals[0] {
                let xe = along(2.0);
                let fe = eval(&xe, &mut evals);
                if fe < fr {
                    pts[d] = xe;
                    vals[d] = fe;
                } else {
                    pts[d] = xr;
                    vals[d] = fr;
                }
                continue;
            }
            if fr < vals[d - 1] {
                pts[d] = xr;
                vals[d] = fr;
                continue;
            }
            let (xc, fc) = if fr < vals[d] {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < vals[d].min(fr) {
                pts[d] = xc;
                vals[d] = fc;
                continue;
            }
            let best = pts[0].clone();
            for i in 1..=d {
                pts[i] = best.iter().zip(&pts[i]).map(|(b, p)| b + 0.5 * (p - b)).collect();
                vals[i] = eval(&pts[i], &mut evals);
            }
        }
        let best = (0..=d)
            .min_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)))
            .unwrap();
        Minimum {
            x: pts[best].clone(),
            value: vals[best],
            evals,
        }
    }
}
