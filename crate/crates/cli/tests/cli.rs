use std::path::Path;

use nlse_cli::{dispatch, EXIT_DIVERGENCE, EXIT_OK, EXIT_USAGE};

fn nlse(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("nlse").chain(args.iter().copied());
    let code = dispatch(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const SMOKE: &str = r#"
[problem]
potential = "harmonic"
beta = -1.0
sigmas = [1.0]
final_time = 0.125
interval = [-8.0, 8.0]
oversample_q = 4

[sweep]
schemes = ["ltfs", "stfs"]
mode = "diagonal"
h_exponents = [2, 3, 4]
tau0 = 0.015625

[reference]
tau = 6.103515625e-5
h_exponent = 5
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("study.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn missing_config_exits_one() {
    let (code, _, err) = nlse(&["converge", "--config", "missing.toml"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("missing.toml"), "{err}");
}

#[test]
fn unknown_subcommand_and_flag_exit_one() {
    let (code, _, err) = nlse(&["frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, _) = nlse(&["rco", "--N", "64", "--tau-over-cfl", "0.5", "--n", "3", "--bogus"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = nlse(&["--help"]);
    assert_eq!(code, EXIT_OK);
    for sub in ["run", "reference", "converge", "rco", "selftest"] {
        assert!(out.contains(sub), "{out}");
    }
}

#[test]
fn rco_csv_respects_bound() {
    let (code, out, _) = nlse(&["rco", "--N", "512", "--tau-over-cfl", "0.9", "--n", "1000"]);
    assert_eq!(code, EXIT_OK);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("l,mu,abs_delta,abs_S,abs_product"));
    let h = 32.0 / 512.0;
    let tau = 0.9 * h * h / std::f64::consts::PI;
    let mut rows = 0;
    let mut max = 0.0f64;
    for line in lines {
        let product: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        max = max.max(product);
        rows += 1;
    }
    assert_eq!(rows, 512);
    assert!(max <= std::f64::consts::PI * tau / 2.0, "{max}");
}

#[test]
fn run_reports_small_mass_drift() {
    let args = [
        "run", "--scheme", "ltfs", "--potential", "box4", "--sigma", "1", "--beta", "-1", "--N", "512",
        "--tau", "1e-3",
    ];
    let (code, out, err) = nlse(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    let drift: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("mass drift: "))
        .expect("mass drift line")
        .parse()
        .unwrap();
    assert!(drift < 1e-8, "{drift}");
    assert!(out.contains("steps: 1000"));
}

#[test]
fn run_rejects_non_integer_step_count() {
    let (code, _, err) = nlse(&["run", "--N", "64", "--tau", "0.3"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(!err.is_empty());
}

#[test]
fn selftest_passes() {
    let (code, out, _) = nlse(&["selftest", "--seed", "3", "--trials", "3"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}

// The cache directory comes from the environment, so everything that touches
// it lives in this one test to avoid racing on NLSE_CACHE_DIR.
#[test]
fn cached_study_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    std::env::set_var("NLSE_CACHE_DIR", &cache);
    let config = write_config(dir.path(), SMOKE);

    let (code, out, err) = nlse(&["reference", "--config", &config]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(std::fs::read_dir(&cache).unwrap().count(), 1);
    let cache_file = out.split_whitespace().last().unwrap().to_string();
    let first = std::fs::read(&cache_file).unwrap();
    let (code, _, _) = nlse(&["reference", "--config", &config, "--force"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(std::fs::read(&cache_file).unwrap(), first);

    let csv1 = dir.path().join("a.csv");
    let csv2 = dir.path().join("b.csv");
    let svg = dir.path().join("plots/a.svg");
    let (code, out, err) = nlse(&[
        "converge", "--config", &config, "--zero-wall-time", "--csv", csv1.to_str().unwrap(), "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("slope ltfs l2 sigma=1"), "{out}");
    let (code, _, _) =
        nlse(&["converge", "--config", &config, "--zero-wall-time", "--csv", csv2.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let a = std::fs::read(&csv1).unwrap();
    assert_eq!(a, std::fs::read(&csv2).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "scheme,potential,sigma,beta,h,tau,norm,error,n_steps,wall_seconds"
    );
    assert_eq!(text.lines().count(), 7);
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(svg_text.matches("<polyline").count(), 2);

    // table on stdout when no path is configured
    let (code, out, err) = nlse(&["converge", "--config", &config, "--zero-wall-time"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, text);
    assert!(err.contains("slope stfs"));

    // corrupt the cached reference
    std::fs::write(&cache_file, b"garbage").unwrap();
    let (code, _, err) = nlse(&["converge", "--config", &config]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("cache"), "{err}");

    // CFL violation is rejected before any stepping
    let bad = write_config(dir.path(), &SMOKE.replace("tau0 = 0.015625", "tau0 = 0.03125"));
    let (code, _, err) = nlse(&["converge", "--config", &bad]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("h^2/pi"), "{err}");
}

#[test]
fn divergence_exits_two() {
    // far beyond the stability range of explicit exponential Euler with a strong focusing term
    let (code, _, err) = nlse(&[
        "run", "--scheme", "ewi1", "--potential", "zero", "--sigma", "3", "--beta=-1e6", "--N", "64",
        "--tau", "0.5", "--T", "2048",
    ]);
    assert_eq!(code, EXIT_DIVERGENCE, "{err}");
    assert!(err.contains("diverg"), "{err}");
}
