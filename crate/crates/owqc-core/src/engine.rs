//! Analytic input→output solutions (Ũ, E) for the three computation classes
//! and their special cases.
//!
//! Every solution has the form (X, Y)_out = Ũ (x, y)_in + E y_r with all
//! photocurrents set to zero (the feedforward removes them). `e_on_yr` has one
//! column per cluster node in the graph's own node order.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use serde::{Deserialize, Serialize};

use crate::cluster::{partition_blocks, ClusterGraph, ClusterModel, Layout, NodePartition};
use crate::error::{OwqcError, Result};
use crate::gates::{four_node_matrix, rotate_of, rsr, shear_of, squeeze_gain, squeeze_of, FourNodeAngles};
use crate::matrix::{block2, checked_inverse, inverse_with_rcond, Mat, RCOND_MIN};

/// Homodyne phases, one per beam-splitter port or measured node.
///
/// For inputs mixed with measured nodes (cases 2 and 3) the port angles give
/// Θ₊ = input_port + cluster_port and Θ₋ = input_port − cluster_port. In the
/// case-1 layout only `input_port` (Θ_in) and `measured` (Θ₁) are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementAngles {
    /// Phase on the (in + cluster)/√2 output of each input beam splitter.
    pub input_port: Vec<f64>,
    /// Phase on the (in − cluster)/√2 output of each input beam splitter.
    #[serde(default)]
    pub cluster_port: Vec<f64>,
    /// Phase on each measured-only node.
    #[serde(default)]
    pub measured: Vec<f64>,
    /// Local-oscillator amplitude; cancels under feedforward.
    #[serde(default = "unit")]
    pub local_oscillator_amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

impl MeasurementAngles {
    pub fn case1(input_port: Vec<f64>, measured: Vec<f64>) -> Self {
        Self { input_port, cluster_port: Vec::new(), measured, local_oscillator_amplitude: 1.0 }
    }

    pub fn ports(input_port: Vec<f64>, cluster_port: Vec<f64>, measured: Vec<f64>) -> Self {
        Self { input_port, cluster_port, measured, local_oscillator_amplitude: 1.0 }
    }

    /// Port angles realizing given Θ₊ and Θ₋.
    pub fn from_plus_minus(theta_plus: &[f64], theta_minus: &[f64], measured: Vec<f64>) -> Self {
        let a = theta_plus.iter().zip(theta_minus).map(|(p, m)| 0.5 * (p + m)).collect();
        let b = theta_plus.iter().zip(theta_minus).map(|(p, m)| 0.5 * (p - m)).collect();
        Self::ports(a, b, measured)
    }

    pub fn theta_plus(&self) -> Vec<f64> {
        self.input_port.iter().zip(&self.cluster_port).map(|(a, b)| a + b).collect()
    }

    pub fn theta_minus(&self) -> Vec<f64> {
        self.input_port.iter().zip(&self.cluster_port).map(|(a, b)| a - b).collect()
    }

    fn check(&self, p: &NodePartition) -> Result<()> {
        let finite = self.input_port.iter().chain(&self.cluster_port).chain(&self.measured).all(|v| v.is_finite());
        if !finite || !self.local_oscillator_amplitude.is_finite() {
            return Err(OwqcError::DimensionMismatch("non-finite angle".into()));
        }
        let want_cluster = if p.layout() == Layout::Case1 { 0 } else { p.m() };
        let ok = self.input_port.len() == p.m()
            && (self.cluster_port.len() == want_cluster || (want_cluster == 0 && self.cluster_port.len() == p.m()))
            && self.measured.len() == p.l();
        if !ok {
            return Err(OwqcError::DimensionMismatch(format!(
                "angles ({} input-port, {} cluster-port, {} measured) do not fit m = {}, l = {}",
                self.input_port.len(),
                self.cluster_port.len(),
                self.measured.len(),
                p.m(),
                p.l()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    #[serde(rename = "case1_q")]
    Case1Q,
    #[serde(rename = "case1_d")]
    Case1D,
    #[serde(rename = "case2")]
    Case2,
    #[serde(rename = "case3_q")]
    Case3Q,
    #[serde(rename = "case3_d")]
    Case3D,
    #[serde(rename = "three_node")]
    ThreeNode,
    #[serde(rename = "four_node")]
    FourNode,
}

/// Which pivot the block elimination uses: the input-side block (upper) or
/// the measured-side block (lower).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Upper,
    Lower,
}

/// Named intermediate matrices of a solution (Q, H, L, … as applicable).
pub type IntermediateBlocks = BTreeMap<String, Mat>;

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSolution {
    pub u_tilde: Mat,
    pub e_on_yr: Mat,
    pub case_tag: CaseTag,
    pub intermediates: IntermediateBlocks,
}

impl CaseSolution {
    pub fn m(&self) -> usize {
        self.u_tilde.nrows() / 2
    }
}

fn diag(v: impl Iterator<Item = f64>) -> Mat {
    let v: Vec<f64> = v.collect();
    Mat::from_diagonal(&nalgebra::DVector::from_vec(v))
}

fn cos_sin(angles: &[f64]) -> (Mat, Mat) {
    (diag(angles.iter().map(|t| t.cos())), diag(angles.iter().map(|t| t.sin())))
}

fn hcat(parts: &[&Mat]) -> Mat {
    let rows = parts[0].nrows();
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        out.view_mut((0, c), (rows, p.ncols())).copy_from(*p);
        c += p.ncols();
    }
    out
}

fn vcat(top: &Mat, bottom: &Mat) -> Mat {
    hcat(&[&top.transpose(), &bottom.transpose()]).transpose()
}

/// Move columns from role order back to node order.
fn to_node_order(e_roles: &Mat, order: &[usize]) -> Mat {
    let mut e = Mat::zeros(e_roles.nrows(), order.len());
    for (k, &node) in order.iter().enumerate() {
        e.set_column(node, &e_roles.column(k));
    }
    e
}

fn ident(k: usize) -> Mat {
    Mat::identity(k, k)
}

fn check_graph(model: &ClusterModel, p: &NodePartition, want: Layout) -> Result<()> {
    p.validate(model.n())?;
    if p.layout() != want {
        return Err(OwqcError::LayoutMismatch(format!(
            "partition has layout {:?}, this solver needs {:?}",
            p.layout(),
            want
        )));
    }
    Ok(())
}

/// Inputs mixed directly with the output nodes (n = m + l).
pub fn solve_case1(
    model: &ClusterModel,
    partition: &NodePartition,
    angles: &MeasurementAngles,
    variant: Variant,
) -> Result<CaseSolution> {
    check_graph(model, partition, Layout::Case1)?;
    angles.check(partition)?;
    let b = partition_blocks(&model.graph, partition)?;
    let (m, l) = (partition.m(), partition.l());
    let (a11, a12, a22) = (&b.a11, &b.a12, &b.a22);
    let (ci, si) = cos_sin(&angles.input_port);
    let (c1, s1) = cos_sin(&angles.measured);
    let (im, il) = (ident(m), ident(l));
    let mut inter = IntermediateBlocks::new();

    let (u, e_roles, tag) = match variant {
        Variant::Upper => {
            let q = &ci + &si * a11;
            let qi = checked_inverse(&q, "Q")?;
            let h = &s1 * (a22 - a12.transpose() * &qi * &si * a12) + &c1;
            let hi = checked_inverse(&h, "H")?;
            let l_ = &im + &qi * &si * a12 * &hi * &s1 * a12.transpose();
            let v = a11 * &l_ - a12 * &hi * &s1 * a12.transpose();
            let me1 = &hi * (&c1 * a12.transpose() - &s1 * a12.transpose() * &qi * (&ci * a11 - &si));
            let me2 = &hi * (&c1 * a22 - &s1 * (a12.transpose() * &qi * &ci * a12 + &il));
            let u = block2(&(&im + &l_ * &qi * &ci), &(&l_ * &qi * &si), &(&v * &qi * &ci), &(&im + &v * &qi * &si))
                * FRAC_1_SQRT_2;
            let lead = block2(&im, &Mat::zeros(m, m), a11, &(-&im));
            let col = vcat(&(&qi * &si), &im);
            let row = hcat(&[&(&im + a11 * a11 + a12 * &me1), &(a11 * a12 + a12 * &me2)]);
            let e = lead * col * row * FRAC_1_SQRT_2;
            for (k, v_) in [("Q", q), ("H", h), ("L", l_), ("V", v), ("M_e1", me1), ("M_e2", me2)] {
                inter.insert(k.into(), v_);
            }
            (u, e, CaseTag::Case1Q)
        }
        Variant::Lower => {
            let d = &c1 + &s1 * a22;
            let di = checked_inverse(&d, "D")?;
            let p = a11 - a12 * &di * &s1 * a12.transpose();
            let k = &ci + &si * &p;
            let ki = checked_inverse(&k, "K")?;
            let me3 = &di * (&c1 * a12.transpose() - &s1 * a12.transpose() * a11);
            let me4 = &di * (&c1 * a22 - &s1 * (a12.transpose() * a12 + &il));
            let u =
                block2(&(&im + &ki * &ci), &(&ki * &si), &(&p * &ki * &ci), &(&im + &p * &ki * &si)) * FRAC_1_SQRT_2;
            let lead = block2(&im, &Mat::zeros(m, m), &p, &(-&im));
            let col = vcat(&(&ki * &si), &im);
            let row = hcat(&[&(&im + a11 * a11 + a12 * &me3), &(a11 * a12 + a12 * &me4)]);
            let e = lead * col * row * FRAC_1_SQRT_2;
            for (name, v_) in [("D", d), ("P", p), ("K", k), ("M_e3", me3), ("M_e4", me4)] {
                inter.insert(name.into(), v_);
            }
            (u, e, CaseTag::Case1D)
        }
    };
    Ok(CaseSolution { u_tilde: u, e_on_yr: to_node_order(&e_roles, &b.order), case_tag: tag, intermediates: inter })
}

/// Case 1 with sin Θ_in = 0 (Θ_in = 0 on every input): Ũ = S(−ln2/2)·CZ[P].
/// P is symmetric but in general has a nonzero diagonal, so CZ[P] is a
/// generalized shear.
pub fn case1_cz_squeeze(model: &ClusterModel, partition: &NodePartition, measured: &[f64]) -> Result<CaseSolution> {
    let angles = MeasurementAngles::case1(vec![0.0; partition.m()], measured.to_vec());
    let mut sol = solve_case1(model, partition, &angles, Variant::Lower)?;
    let p = sol.intermediates["P"].clone();
    let m = partition.m();
    let half_ln2 = -(2.0_f64.ln()) / 2.0;
    sol.u_tilde = squeeze_of(&vec![half_ln2; m]) * shear_of(&p)?;
    Ok(sol)
}

fn case2_prefactor(a11: &Mat, a12i: &Mat, a12: &Mat, a22: &Mat) -> Result<Mat> {
    let m = a11.nrows();
    let z = Mat::zeros(m, m);
    let scale = block2(&(-a12i), &z, &z, &(-a12.transpose()));
    Ok(shear_of(a22)? * scale * rotate_of(&vec![-FRAC_PI_2; m]) * shear_of(a11)?)
}

fn a12_inverse(a12: &Mat) -> Result<Mat> {
    match inverse_with_rcond(a12) {
        Some((inv, rc)) if rc >= RCOND_MIN => Ok(inv),
        Some((_, rc)) => Err(OwqcError::SingularA12(rc)),
        None => Err(OwqcError::SingularA12(0.0)),
    }
}

/// Inputs mixed with measured nodes, n = 2m.
pub fn solve_case2(
    model: &ClusterModel,
    partition: &NodePartition,
    angles: &MeasurementAngles,
) -> Result<CaseSolution> {
    check_graph(model, partition, Layout::Case2)?;
    angles.check(partition)?;
    let b = partition_blocks(&model.graph, partition)?;
    let m = partition.m();
    let a12i = a12_inverse(&b.a12)?;
    let tp = angles.theta_plus();
    let tm = angles.theta_minus();
    // validates sin Θ₋ ≠ 0
    rsr(&tp, &tm)?;
    let pre = case2_prefactor(&b.a11, &a12i, &b.a12, &b.a22)?;
    let left: Vec<f64> = tp.iter().map(|t| FRAC_PI_2 - t / 2.0).collect();
    let right: Vec<f64> = tp.iter().map(|t| -t / 2.0).collect();
    let tans: Vec<f64> = tm.iter().map(|t| (t / 2.0).tan()).collect();
    let u = &pre * rotate_of(&left) * squeeze_gain(&tans) * rotate_of(&right);

    let ar = b.reassemble();
    let nul = &ar * &ar + ident(2 * m);
    let lead = block2(&a12i, &Mat::zeros(m, m), &(&b.a22 * &a12i), &(-ident(m)));
    let e_roles = -(lead * &nul);
    let mut inter = IntermediateBlocks::new();
    inter.insert("A12_inv".into(), a12i);
    inter.insert("nullifier".into(), nul);
    inter.insert("prefactor".into(), pre);
    Ok(CaseSolution {
        u_tilde: u,
        e_on_yr: to_node_order(&e_roles, &b.order),
        case_tag: CaseTag::Case2,
        intermediates: inter,
    })
}

/// Inputs mixed with measured nodes, n = 2m + l.
pub fn solve_case3(
    model: &ClusterModel,
    partition: &NodePartition,
    angles: &MeasurementAngles,
    variant: Variant,
) -> Result<CaseSolution> {
    check_graph(model, partition, Layout::Case3)?;
    angles.check(partition)?;
    let b = partition_blocks(&model.graph, partition)?;
    let (m, l) = (partition.m(), partition.l());
    let (a11, a12, a13, a22, a23, a33) = (&b.a11, &b.a12, &b.a13, &b.a22, &b.a23, &b.a33);
    let (c3, s3) = cos_sin(&angles.measured);
    let (im, il) = (ident(m), ident(l));
    let tail = rsr(&angles.theta_plus(), &angles.theta_minus())?;
    let cz22 = shear_of(a22)?;
    let mut inter = IntermediateBlocks::new();

    let (mid, e_roles, tag) = match variant {
        Variant::Upper => {
            let a12i = a12_inverse(a12)?;
            let ht = &c3 + &s3 * (a33 - a23.transpose() * &a12i * a13);
            let hti = checked_inverse(&ht, "H~")?;
            let k1 = &a12i * a13 * &hti * &s3;
            let k2 = a23.transpose() * &a12i * a11 - a13.transpose();
            let bb = &k1 * &k2 + &a12i * a11;
            let top_left = -((&k1 * a23.transpose() + &im) * &a12i);
            let mid = block2(
                &top_left,
                &bb,
                &(a23 * &hti * &s3 * a23.transpose() * &a12i),
                &(-a12.transpose() - a23 * &hti * &s3 * &k2),
            );
            let a_h = &a12i * a13 * &hti;
            let e11 = &top_left - &bb * a11 - &a_h * &c3 * a13.transpose() - a12.transpose();
            let e12 = -(&bb * a12) - &a_h * &c3 * a23.transpose() - a22;
            let e13 = -(&bb * a13) + &a_h * (&s3 - &c3 * a33) - a23;
            let e21 = a12.transpose() * a11
                + a23 * (&hti * &s3 * (a23.transpose() * &a12i + &k2 * a11) + &hti * &c3 * a13.transpose())
                + a22 * (&top_left - &bb * a11 - &a_h * &c3 * a13.transpose());
            let e22 = &im
                + a12.transpose() * a12
                + a22 * (-(&bb * a12) - &a_h * &c3 * a23.transpose())
                + a23 * (&hti * &s3 * &k2 * a12 + &hti * &c3 * a23.transpose());
            let e23 = a12.transpose() * a13
                + a22 * (-(&bb * a13) + &a_h * (&s3 - &c3 * a33))
                + a23 * (&hti * &s3 * &k2 * a13 + &hti * (&c3 * a33 - &s3));
            let e = vcat(&hcat(&[&e11, &e12, &e13]), &hcat(&[&e21, &e22, &e23]));
            for (k, v) in [("A12_inv", a12i), ("H~", ht), ("K1", k1), ("K2", k2)] {
                inter.insert(k.into(), v);
            }
            (mid, e, CaseTag::Case3Q)
        }
        Variant::Lower => {
            let dt = &c3 + &s3 * a33;
            let dti = checked_inverse(&dt, "D~")?;
            let kt1 = a11 - a13 * &dti * &s3 * a13.transpose();
            let kt2 = a12 - a13 * &dti * &s3 * a23.transpose();
            let kt2i = checked_inverse(&kt2, "K~2")?;
            let kt3 = a23.transpose() * &kt2i * &kt1 - a13.transpose();
            let f = &il + &s3 * a23.transpose() * &kt2i * a13 * &dti;
            let mid = block2(
                &(-&kt2i),
                &(&kt2i * &kt1),
                &(a23 * &dti * &s3 * a23.transpose() * &kt2i),
                &(-a12.transpose() - a23 * &dti * &s3 * &kt3),
            );
            let a_d = a13 * &dti;
            let s_c = &s3 - &c3 * a33;
            let g11 = -(&kt2i * &kt1 * a11) - &kt2i * &a_d * &c3 * a13.transpose() - &kt2i - a12.transpose();
            let g12 = -(&kt2i * &kt1 * a12) - &kt2i * &a_d * &c3 * a23.transpose() - a22;
            let g13 = -(&kt2i * &kt1 * a13) + &kt2i * &a_d * &s_c - a23;
            let g21 = a12.transpose() * a11 - a22 * &kt2i * (&kt1 * a11 + &a_d * &c3 * a13.transpose() + &im)
                + a23 * &dti * (&s3 * a23.transpose() * &kt2i + &s3 * &kt3 * a11 + &f * &c3 * a13.transpose());
            let g22 = &im + a12.transpose() * a12 - a22 * &kt2i * (&kt1 * a12 + &a_d * &c3 * a23.transpose())
                + a23 * &dti * (&s3 * &kt3 * a12 + &f * &c3 * a23.transpose());
            let g23 = a12.transpose() * a13 - a22 * &kt2i * (&kt1 * a13 - &a_d * &s_c)
                + a23 * &dti * (&s3 * &kt3 * a13 - &f * &s_c);
            let e = vcat(&hcat(&[&g11, &g12, &g13]), &hcat(&[&g21, &g22, &g23]));
            for (k, v) in [("D~", dt), ("K~1", kt1), ("K~2", kt2), ("K~3", kt3), ("F", f)] {
                inter.insert(k.into(), v);
            }
            (mid, e, CaseTag::Case3D)
        }
    };
    Ok(CaseSolution {
        u_tilde: cz22 * mid * tail,
        e_on_yr: to_node_order(&e_roles, &b.order),
        case_tag: tag,
        intermediates: inter,
    })
}

/// Dispatch on the partition layout. With no variant given, the upper
/// variant is tried first and the lower one on a singular pivot.
pub fn solve_auto(
    model: &ClusterModel,
    partition: &NodePartition,
    angles: &MeasurementAngles,
    variant: Option<Variant>,
) -> Result<CaseSolution> {
    partition.validate(model.n())?;
    let with = |v: Variant| match partition.layout() {
        Layout::Case1 => solve_case1(model, partition, angles, v),
        Layout::Case2 => solve_case2(model, partition, angles),
        Layout::Case3 => solve_case3(model, partition, angles, v),
    };
    match variant {
        Some(v) => with(v),
        None => match with(Variant::Upper) {
            Err(OwqcError::SingularBlock { .. } | OwqcError::SingularA12(_)) if partition.layout() != Layout::Case2 => {
                with(Variant::Lower)
            }
            other => other,
        },
    }
}

/// Single-mode computation on the weighted triangle (input on node 1, output
/// node 2, node 3 measured at Θ₃). E comes from the general n = 2m + l
/// assembly on the same graph.
pub fn three_node_family(
    a12: f64,
    a13: f64,
    a23: f64,
    theta3: f64,
    theta_plus: f64,
    theta_minus: f64,
) -> Result<CaseSolution> {
    let (s, c) = theta3.sin_cos();
    let d = a12 * c - a23 * a13 * s;
    if d.abs() < 1e-12 {
        return Err(OwqcError::DegenerateD(d));
    }
    let core = Mat::from_row_slice(2, 2, &[-c, -a13 * a13 * s, a23 * a23 * s, -a12 * d + a13 * a12 * a23 * s]) / d;
    let u = &core * rsr(&[theta_plus], &[theta_minus])?;

    let graph = ClusterGraph::from_edges(3, &[(0, 1, a12), (0, 2, a13), (1, 2, a23)])?;
    let model = crate::cluster::build_cluster(&graph, None)?;
    let partition = NodePartition::new(vec![0], vec![1], vec![2]);
    let angles = MeasurementAngles::from_plus_minus(&[theta_plus], &[theta_minus], vec![theta3]);
    let general = solve_case3(&model, &partition, &angles, Variant::Upper)
        .or_else(|_| solve_case3(&model, &partition, &angles, Variant::Lower))?;
    let mut inter = IntermediateBlocks::new();
    inter.insert("d".into(), Mat::from_element(1, 1, d));
    inter.insert("core".into(), core);
    Ok(CaseSolution { u_tilde: u, e_on_yr: general.e_on_yr, case_tag: CaseTag::ThreeNode, intermediates: inter })
}

/// Triangle weights and angles that make the three-node family equal the
/// z-target matrix; Θ₊ must be set to −Θ for target angle Θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZFamilyWeights {
    pub a12: f64,
    pub a13: f64,
    pub a23: f64,
    pub theta3: f64,
    pub theta_minus: f64,
}

impl ZFamilyWeights {
    pub fn theta_plus_for(&self, theta: f64) -> f64 {
        -theta
    }
}

pub fn three_node_weights_for_z(z: u32, a23: f64) -> Result<ZFamilyWeights> {
    if z == 0 {
        return Err(OwqcError::InvalidWeight("z must be a positive integer".into()));
    }
    if a23 == 0.0 || !a23.is_finite() {
        return Err(OwqcError::InvalidWeight("a23 must be finite and nonzero".into()));
    }
    let root = (1.0 + z as f64).sqrt();
    Ok(ZFamilyWeights {
        a12: 1.0 / (1.0 + root),
        a13: a23 * root,
        a23,
        // arccot with range (0, π)
        theta3: 1.0_f64.atan2(a23 * a23 * z as f64),
        theta_minus: FRAC_PI_2,
    })
}

/// [[z cos Θ + (z+1) sin Θ, (z+1) cos Θ − z sin Θ], [−cos Θ − sin Θ, −cos Θ + sin Θ]].
pub fn z_target(z: f64, theta: f64) -> Mat {
    let (s, c) = theta.sin_cos();
    Mat::from_row_slice(2, 2, &[z * c + (z + 1.0) * s, (z + 1.0) * c - z * s, -c - s, -c + s])
}

/// Error matrix E_j of template `config_id` on y_r, columns ordered
/// (input node, output node, Θ₃ node, Θ₄ node).
pub fn four_node_error(config_id: u8, theta3: f64, theta4: f64) -> Result<Mat> {
    let t = |a: f64| {
        if a.cos().abs() < crate::gates::ANGLE_EPS {
            Err(OwqcError::DegenerateAngles(format!("tan({a}) is singular")))
        } else {
            Ok(a.tan())
        }
    };
    let ct = |a: f64| {
        if a.sin().abs() < crate::gates::ANGLE_EPS {
            Err(OwqcError::DegenerateAngles(format!("cot({a}) is singular")))
        } else {
            Ok(1.0 / a.tan())
        }
    };
    let rows: [f64; 8] = match config_id {
        1 => {
            let (t3, k4) = (t(theta3)?, ct(theta4)?);
            [-3.0 * k4, -k4, 1.0 - 2.0 * k4 * t3, 3.0 - k4 * t3, -2.0, 1.0, -2.0 * t3, -t3]
        }
        2 => {
            let (k3, t4) = (ct(theta3)?, t(theta4)?);
            [-2.0 * k3, -k3, 3.0, 1.0, 2.0 * k3 * t4 - 1.0, k3 * t4 + 2.0, -2.0 * t4, t4]
        }
        3 => {
            let (k3, k4) = (ct(theta3)?, ct(theta4)?);
            [2.0 * k3 * k4 - 1.0, k3, 2.0 + k3 * k4, 3.0 * k3, -2.0 * k4, 1.0, -k4, -2.0]
        }
        4 => {
            let (t3, t4) = (t(theta3)?, t(theta4)?);
            [3.0, t3, 2.0 * t3, 1.0, -2.0 * t4, 3.0 - t3 * t4, 1.0 - 2.0 * t3 * t4, t4]
        }
        5 => {
            let (t3, t4) = (t(theta3)?, t(theta4)?);
            [t3 * t4 - 3.0, -2.0 * t4, -t3 * t4 - 2.0, -3.0 * t4, -t3, 3.0, t3, 2.0]
        }
        _ => {
            return Err(OwqcError::InvalidPartition(format!(
                "four-node configuration id must be 1..5, got {config_id}"
            )))
        }
    };
    Ok(Mat::from_row_slice(2, 4, &rows))
}

/// Template Ũ_j and its tabulated error matrix E_j.
pub fn four_node_transform(config_id: u8, angles: &FourNodeAngles) -> Result<CaseSolution> {
    let u = four_node_matrix(config_id, angles)?;
    let e = four_node_error(config_id, angles.theta3, angles.theta4)?;
    // the part left of R·S·R, quarter turns included
    let prefactor =
        four_node_matrix(config_id, &FourNodeAngles { theta_plus: 0.0, theta_minus: FRAC_PI_2, ..*angles })?;
    let mut inter = IntermediateBlocks::new();
    inter.insert("prefactor".into(), prefactor);
    Ok(CaseSolution { u_tilde: u, e_on_yr: e, case_tag: CaseTag::FourNode, intermediates: inter })
}

/// The matrix multiplying y_s: E · Re U.
pub fn effective_error_on_ys(solution: &CaseSolution, model: &ClusterModel) -> Result<Mat> {
    if solution.e_on_yr.ncols() != model.n() {
        return Err(OwqcError::DimensionMismatch(format!(
            "error matrix has {} columns, model has {} nodes",
            solution.e_on_yr.ncols(),
            model.n()
        )));
    }
    Ok(&solution.e_on_yr * &model.re_u)
}
