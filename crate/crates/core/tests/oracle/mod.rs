//! Brute-force reference computations built from raw complex matrices.
//! Nothing here calls into the library; the numbers they produce are the
//! frozen golden values the library is checked against.

#![allow(dead_code)]

use num_complex::Complex64 as C;

pub type Mat = Vec<Vec<C>>;
pub type Vector = Vec<C>;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

pub fn eye(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| c(if i == j { 1.0 } else { 0.0 })).collect()).collect()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn kron_all(ms: &[Mat]) -> Mat {
    ms[1..].iter().fold(ms[0].clone(), |acc, m| kron(&acc, m))
}

pub fn ket(n: usize, i: usize) -> Vector {
    let mut v = vec![c(0.0); n];
    v[i] = c(1.0);
    v
}

pub fn kron_vec(a: &Vector, b: &Vector) -> Vector {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

pub fn outer(v: &Vector) -> Mat {
    v.iter().map(|x| v.iter().map(|y| x * y.conj()).collect()).collect()
}

pub fn sub(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect()).collect()
}

pub fn matvec(m: &Mat, v: &Vector) -> Vector {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn add(a: &Vector, b: &Vector) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(s: f64, v: &Vector) -> Vector {
    v.iter().map(|x| x * s).collect()
}

pub fn norm2(v: &Vector) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

pub fn dot(a: &Vector, b: &Vector) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn normalized(v: &Vector) -> Vector {
    scale(1.0 / norm2(v).sqrt(), v)
}

// R = [head, tail], Abar = [init, hbar, tbar], S = [down, up], A = [init, up, down]
pub const HEAD: usize = 0;
pub const TAIL: usize = 1;
pub const AB_INIT: usize = 0;
pub const HBAR: usize = 1;
pub const TBAR: usize = 2;
pub const DOWN: usize = 0;
pub const UP: usize = 1;
pub const A_INIT: usize = 0;
pub const A_UP: usize = 1;
pub const A_DOWN: usize = 2;

pub fn basis4(r: usize, ab: usize, s: usize, a: usize) -> Vector {
    kron_vec(&kron_vec(&kron_vec(&ket(2, r), &ket(3, ab)), &ket(2, s)), &ket(3, a))
}

fn index4(r: usize, ab: usize, s: usize, a: usize) -> usize {
    ((r * 3 + ab) * 2 + s) * 3 + a
}

pub fn psi_init() -> Vector {
    add(
        &scale((1.0f64 / 3.0).sqrt(), &basis4(HEAD, AB_INIT, DOWN, A_INIT)),
        &scale((2.0f64 / 3.0).sqrt(), &basis4(TAIL, AB_INIT, DOWN, A_INIT)),
    )
}

/// The coin-to-labs evolution, applied only where it is specified:
/// |head,init,down,a⟩ → |head,hbar,down,a⟩ and
/// |tail,init,down,a⟩ → |tail,tbar⟩(|up⟩+|down⟩)/√2 |a⟩.
pub fn u_init_00(v: &Vector) -> Vector {
    let h = (0.5f64).sqrt();
    let mut out = vec![c(0.0); 36];
    for (i, amp) in v.iter().enumerate() {
        if amp.norm() == 0.0 {
            continue;
        }
        let (r, ab, s, a) = (i / 18, (i / 6) % 3, (i / 3) % 2, i % 3);
        assert!(ab == AB_INIT && s == DOWN, "oracle coin map used outside its domain");
        if r == HEAD {
            out[index4(HEAD, HBAR, DOWN, a)] += amp;
        } else {
            out[index4(TAIL, TBAR, UP, a)] += amp * h;
            out[index4(TAIL, TBAR, DOWN, a)] += amp * h;
        }
    }
    out
}

/// The friend's readout: |down,init⟩ → |down,down⟩, |up,init⟩ → |up,up⟩.
pub fn u_10_20(v: &Vector) -> Vector {
    let mut out = vec![c(0.0); 36];
    for (i, amp) in v.iter().enumerate() {
        if amp.norm() == 0.0 {
            continue;
        }
        let (r, ab, s, a) = (i / 18, (i / 6) % 3, (i / 3) % 2, i % 3);
        assert!(a == A_INIT, "oracle readout map used outside its domain");
        let pointer = if s == UP { A_UP } else { A_DOWN };
        out[index4(r, ab, s, pointer)] += amp;
    }
    out
}

pub fn okbar_vec() -> Vector {
    let h = (0.5f64).sqrt();
    sub_vec(&scale(h, &kron_vec(&ket(2, HEAD), &ket(3, HBAR))), &scale(h, &kron_vec(&ket(2, TAIL), &ket(3, TBAR))))
}

pub fn ok_vec() -> Vector {
    let h = (0.5f64).sqrt();
    sub_vec(&scale(h, &kron_vec(&ket(2, DOWN), &ket(3, A_DOWN))), &scale(h, &kron_vec(&ket(2, UP), &ket(3, A_UP))))
}

fn sub_vec(a: &Vector, b: &Vector) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn p_r(label: usize) -> Mat {
    kron_all(&[outer(&ket(2, label)), eye(3), eye(2), eye(3)])
}

pub fn p_s(label: usize) -> Mat {
    kron_all(&[eye(2), eye(3), outer(&ket(2, label)), eye(3)])
}

pub fn p_okbar() -> Mat {
    kron(&outer(&okbar_vec()), &eye(6))
}

pub fn p_ok() -> Mat {
    kron(&eye(6), &outer(&ok_vec()))
}

/// One leaf of the 16-leaf per-step collapse tree.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub r: &'static str,
    pub z: &'static str,
    pub wbar: &'static str,
    pub w: &'static str,
    pub p: f64,
}

/// Every (r, z, wbar, w) combination with its probability when each
/// measurement collapses the state as it happens. Vanishing branches are
/// carried as probability 0.
pub fn collapse_leaves() -> Vec<Leaf> {
    let r_ops = [("head", p_r(HEAD)), ("tail", p_r(TAIL))];
    let z_ops = [("down", p_s(DOWN)), ("up", p_s(UP))];
    let wbar_ops = [("okbar", p_okbar()), ("failbar", sub(&eye(36), &p_okbar()))];
    let w_ops = [("ok", p_ok()), ("fail", sub(&eye(36), &p_ok()))];
    let mut leaves = Vec::new();
    let start = u_init_00(&psi_init());
    for (r, pr) in &r_ops {
        for (z, pz) in &z_ops {
            for (wbar, pwb) in &wbar_ops {
                for (w, pw) in &w_ops {
                    let mut state = start.clone();
                    let mut p = 1.0;
                    let mut steps: Vec<(bool, &Mat)> = vec![(false, pr), (true, pz), (false, pwb), (false, pw)];
                    for (readout_first, proj) in steps.drain(..) {
                        if readout_first {
                            state = u_10_20(&state);
                        }
                        let projected = matvec(proj, &state);
                        let factor = norm2(&projected);
                        p *= factor;
                        if factor < 1e-300 {
                            break;
                        }
                        state = normalized(&projected);
                    }
                    leaves.push(Leaf { r, z, wbar, w, p });
                }
            }
        }
    }
    leaves
}

/// `‖P_ok U P_okbar U₀ ψ‖²`: both outer labs read out, nothing collapsed inside.
pub fn external_okbar_ok() -> f64 {
    let s = matvec(&p_okbar(), &u_init_00(&psi_init()));
    norm2(&matvec(&p_ok(), &u_10_20(&s)))
}

/// `‖P_ok P_up U P_tail U₀ ψ‖²`.
pub fn tail_up_ok_chain() -> f64 {
    let s = matvec(&p_r(TAIL), &u_init_00(&psi_init()));
    let s = matvec(&p_s(UP), &u_10_20(&s));
    norm2(&matvec(&p_ok(), &s))
}

/// Infidelity between the friend's post-readout state and the tail branch
/// before the friend's projection.
pub fn friend_vs_coin_divergence() -> f64 {
    let psi10 = normalized(&u_10_20(&normalized(&matvec(&p_r(TAIL), &u_init_00(&psi_init())))));
    let psi11 = normalized(&matvec(&p_s(UP), &psi10));
    1.0 - dot(&psi10, &psi11).norm_sqr()
}

/// The single-lab scenario on S ⊗ A (2 × 3): the friend sees `up`, Wigner
/// models the readout unitarily. Returns the infidelity of the two states.
pub fn wigner_divergence() -> f64 {
    let h = (0.5f64).sqrt();
    let friend = kron_vec(&ket(2, UP), &ket(3, A_UP));
    let wigner = add(&scale(h, &kron_vec(&ket(2, DOWN), &ket(3, A_DOWN))), &scale(h, &kron_vec(&ket(2, UP), &ket(3, A_UP))));
    1.0 - dot(&friend, &wigner).norm_sqr()
}

/// `Tr ρ_K²` for the subsystems `keep` of a pure state on `dims`, by
/// explicit partial trace over the rest.
pub fn reduced_purity(v: &Vector, dims: &[usize], keep: &[usize]) -> f64 {
    let digits = |mut i: usize| {
        let mut d = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            d[k] = i % dims[k];
            i /= dims[k];
        }
        d
    };
    let split = |i: usize| {
        let d = digits(i);
        let kept: Vec<usize> = keep.iter().map(|&k| d[k]).collect();
        let rest: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).map(|k| d[k]).collect();
        (kept, rest)
    };
    let mut rho: std::collections::BTreeMap<(Vec<usize>, Vec<usize>), C> = Default::default();
    for i in 0..v.len() {
        for j in 0..v.len() {
            let (ki, ri) = split(i);
            let (kj, rj) = split(j);
            if ri == rj {
                *rho.entry((ki, kj)).or_insert(c(0.0)) += v[i] * v[j].conj();
            }
        }
    }
    rho.values().map(|z| z.norm_sqr()).sum()
}
