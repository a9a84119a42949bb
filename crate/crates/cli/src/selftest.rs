use clap::Args;
use fac_core::analysis::{convergence_point, entropy_brute_force, entropy_delta_closed_form, variance_ratio_experiment};
use fac_core::density::{rde_with_kernel, Epanechnikov, GateConfig};
use fac_core::learner::{Mlp, OutputActivation};
use fac_core::linalg::{qr_column_pivot, Matrix};
use fac_core::partition::PartitionSpec;
use fac_oracles::{
    central_gradient, convergence_point_by_suffix_scan, duplicate_mass_function, gram_schmidt_qr,
    max_reconstruction_error, nearest_center_index, rde_by_quadrature,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Failure;

#[derive(Args)]
pub struct SelftestArgs {
    /// Only run oracles whose name contains this text.
    #[arg(long)]
    filter: Option<String>,
    /// Test hook: evaluate the density gate with a wrong kernel constant, so
    /// the density oracle must fail.
    #[arg(long)]
    perturb_kernel: bool,
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rde_quadrature(kernel: &Epanechnikov) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let n = rng.random_range(1..10);
        let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (r, h, beta) = (
            rng.random_range(-2.5..2.5),
            rng.random_range(0.05..1.0),
            rng.random_range(0.05..1.0),
        );
        let cfg = GateConfig {
            bandwidth: h,
            beta,
            ..Default::default()
        };
        let got = rde_with_kernel(r, &rewards, &cfg, kernel);
        worst = worst.max((got - rde_by_quadrature(r, &rewards, h, beta)).abs());
    }
    outcome(worst <= 1e-9, format!("max |closed form - quadrature| = {worst:.2e}"))
}

fn qr_gram_schmidt() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut recon, mut diag): (f64, f64) = (0.0, 0.0);
    for _ in 0..200 {
        let p = rng.random_range(1..7);
        let n = rng.random_range(p..p + 20);
        let a = Matrix::new(n, p, (0..n * p).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
        let f = qr_column_pivot(&a).unwrap();
        let scale = a.max_abs();
        let qr = f.q.matmul(&f.r).unwrap();
        let ap = a.permute_columns(&f.perm);
        recon = recon.max(qr.data().iter().zip(ap.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale);
        // QR of a full-rank matrix is unique up to signs, so Gram-Schmidt on
        // the same column order must give the same |diag(R)|.
        let cols: Vec<Vec<f64>> = (0..p).map(|j| ap.column(j)).collect();
        let (q, r) = gram_schmidt_qr(&cols);
        recon = recon.max(max_reconstruction_error(&cols, &q, &r) / scale);
        for (i, m) in f.pivot_magnitudes().iter().enumerate() {
            diag = diag.max((m - r[i][i].abs()).abs() / scale);
        }
    }
    outcome(
        recon <= 1e-9 && diag <= 1e-9,
        format!("reconstruction {recon:.2e}, |diag R| vs Gram-Schmidt {diag:.2e}"),
    )
}

fn fd_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let out = if k % 2 == 0 {
            OutputActivation::Identity
        } else {
            OutputActivation::ScaledTanh {
                low: vec![-1.0, -2.0],
                high: vec![1.0, 2.0],
            }
        };
        let net = Mlp::new(&[4, 6, 5, 2], out, &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let up = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let (g, _) = net.gradient(&x, &up).unwrap();
        let fd = central_gradient(
            |p| {
                let mut n = net.clone();
                n.params_mut().copy_from_slice(p);
                let y = n.forward(&x).unwrap();
                y[0] * up[0] + y[1] * up[1]
            },
            net.params(),
            1e-5,
        );
        for (a, b) in g.iter().zip(&fd) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-6));
        }
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e}"))
}

fn entropy() -> Outcome {
    let mut worst: f64 = 0.0;
    for m in [4usize, 10, 100, 1000] {
        for lambda in [0, 1, 2, 3, m / 2] {
            let closed = entropy_delta_closed_form(m, lambda).unwrap();
            let uniform = entropy_brute_force(&vec![1.0 / m as f64; m]).unwrap();
            let dup = entropy_brute_force(&duplicate_mass_function(m, lambda)).unwrap();
            worst = worst.max((closed - (uniform - dup)).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max difference {worst:.2e}"))
}

fn cp_suffix() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..2000 {
        let n = rng.random_range(1..30);
        let curve: Vec<(u64, f64)> = (0..n)
            .map(|i| (1000 * (i as u64 + 1), rng.random_range(-1500.0..0.0) * (1.0 - i as f64 / n as f64)))
            .collect();
        if Some(convergence_point(&curve).unwrap()) != convergence_point_by_suffix_scan(&curve) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/2000 curves disagree"))
}

fn variance_ratio() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (b, zeta) in [(32, 4), (64, 8)] {
        let v = variance_ratio_experiment(b, zeta, 20_000, 6).unwrap();
        pass &= (v.measured - v.theoretical).abs() <= 0.15 * v.theoretical;
        parts.push(format!("b={b} zeta={zeta}: {:.3} vs {:.3}", v.measured, v.theoretical));
    }
    outcome(pass, parts.join(", "))
}

fn grid_argmin() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..5000 {
        let k = rng.random_range(1..4);
        let lower: Vec<f64> = (0..k).map(|_| rng.random_range(-10.0..10.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.5..20.0)).collect();
        let mu: Vec<u32> = (0..k).map(|_| rng.random_range(1..100)).collect();
        let spec = PartitionSpec::new((0..k).collect(), lower.clone(), upper.clone(), mu.clone()).unwrap();
        let s: Vec<f64> = (0..k).map(|i| rng.random_range(lower[i]..upper[i])).collect();
        let got = spec.map_state(&s).unwrap();
        let want: Vec<u32> = (0..k)
            .map(|i| nearest_center_index(s[i], lower[i], upper[i], mu[i] as usize) as u32)
            .collect();
        if got.0 != want {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/5000 states disagree"))
}

pub fn run(args: &SelftestArgs) -> Result<(), Failure> {
    let kernel = if args.perturb_kernel {
        Epanechnikov { norm: 0.76 }
    } else {
        Epanechnikov::STANDARD
    };
    let oracles: [(&str, &dyn Fn() -> Outcome); 7] = [
        ("rde_quadrature", &|| rde_quadrature(&kernel)),
        ("qr_gram_schmidt", &qr_gram_schmidt),
        ("fd_gradients", &fd_gradients),
        ("entropy_brute_force", &entropy),
        ("cp_exhaustive_suffix", &cp_suffix),
        ("variance_ratio", &variance_ratio),
        ("grid_argmin", &grid_argmin),
    ];
    let selected: Vec<_> = oracles
        .iter()
        .filter(|(name, _)| args.filter.as_deref().is_none_or(|f| name.contains(f)))
        .collect();
    if selected.is_empty() {
        return Err(Failure::Config(format!(
            "no oracle matches filter `{}`",
            args.filter.as_deref().unwrap_or_default()
        )));
    }
    let mut failed = 0;
    for (name, check) in selected {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        Err(Failure::Selftest)
    } else {
        Ok(())
    }
}
