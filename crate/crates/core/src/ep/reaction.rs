use super::params::FkParams;

/// Heaviside step with H(0) = 1.
#[inline]
fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// The three normalized membrane currents, 1/ms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Currents {
    pub j_fi: f64,
    pub j_so: f64,
    pub j_si: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    /// Ionic contribution to du/dt.
    pub du: f64,
    pub dv: f64,
    pub dw: f64,
}

#[inline]
pub fn currents(u: f64, v: f64, w: f64, p: &FkParams) -> Currents {
    let above = heaviside(u - p.u_c);
    let below = heaviside(p.u_c - u);
    Currents {
        j_fi: -above * (1.0 - u) * (u - p.u_c) * v / p.tau_d,
        j_so: below * u / p.tau_0 + above / p.tau_r,
        j_si: -(1.0 + (p.k * (u - p.u_c_si)).tanh()) * w / (2.0 * p.tau_si),
    }
}

/// Right-hand sides of the ionic model at one point.
#[inline]
pub fn reaction_rates(u: f64, v: f64, w: f64, p: &FkParams) -> Rates {
    let j_si = -(1.0 + (p.k * (u - p.u_c_si)).tanh()) * w / (2.0 * p.tau_si);
    // Only one side of each Heaviside switch is live; evaluating just that
    // side gives the same values as the product form.
    if u >= p.u_c {
        let j_fi = -(1.0 - u) * (u - p.u_c) * v / p.tau_d;
        let j_so = 1.0 / p.tau_r;
        Rates {
            du: -(j_fi + j_so + j_si),
            dv: -v / p.tau_v_plus,
            dw: -w / p.tau_w_plus,
        }
    } else {
        // Two-constant switch for the v recovery time.
        let tau_v_minus = if u >= p.u_v {
            p.tau_v1_minus
        } else {
            p.tau_v2_minus
        };
        let j_so = u / p.tau_0;
        Rates {
            du: -(0.0 + j_so + j_si),
            dv: (1.0 - v) / tau_v_minus,
            dw: (1.0 - w) / p.tau_w_minus,
        }
    }
}
