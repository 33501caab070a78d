use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spectral-opt"));
    c.env_remove("SPECTRAL_OPT_THREADS");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

// Small enough to run in well under a second per training run.
const SMALL: &str = r#"
seed = 3

[verify]
sizes = [[2, 3]]
instances = 4
points = 2
steps = 20
probes = 6

[data]
samples_per_class = 60

[model]
hidden = [8]

[train]
epochs = 3
seeds = [0, 1]

[sweep]
etas = [0.01, 1.0]
epochs = 2
probe_step = 10
"#;

fn small_config(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p
}

fn value<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing {key} in\n{text}"))
}

#[test]
fn verify_writes_sorted_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = run(
        &[
            "verify",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = std::fs::read_to_string(out.join("verify_report.txt")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert!(lines.len() >= 20);
    let mut sorted = lines.clone();
    sorted.sort();
    assert_eq!(lines, sorted);
    for l in &lines {
        assert!(l.starts_with("CHECK ") && l.ends_with(" PASS"), "{l}");
        assert!(l.contains(" residual=") && l.contains(" tol="), "{l}");
    }
    assert_eq!(stdout(&o), report);
}

#[test]
fn unknown_config_key_is_a_usage_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[train]\nlearning_rate = 0.1\n").unwrap();
    let o = run(&["verify", "--config", p.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));
}

#[test]
fn invalid_values_and_arguments_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[converge]\nmode = \"fastest\"\n").unwrap();
    let o = run(&["converge", "--config", p.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fastest"));

    assert_eq!(run(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(
        run(&["verify", "--config", "missing.toml"], dir.path())
            .status
            .code(),
        Some(2)
    );

    let o = bin()
        .args(["spectrum", "x.txt"])
        .env("SPECTRAL_OPT_THREADS", "many")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn spectrum_of_identity_and_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("eye.txt"), "3 3\n1 0 0\n0 1 0\n0 0 1\n").unwrap();
    std::fs::write(dir.path().join("diag.txt"), "# diag(3, 1)\n2 2\n3 0\n0 1\n").unwrap();

    let o = run(&["spectrum", "eye.txt"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(value(&s, "sigma"), "1,1,1");
    assert_eq!(value(&s, "flatness").parse::<f64>().unwrap(), 1.0);
    assert_eq!(value(&s, "eta_ratio").parse::<f64>().unwrap(), 1.0);
    assert_eq!(value(&s, "ratio_muon").parse::<f64>().unwrap(), 1.0);

    let o = run(&["spectrum", "diag.txt"], dir.path());
    let s = stdout(&o);
    assert_eq!(value(&s, "sigma"), "3,1");
    assert!((value(&s, "flatness").parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    // η_max^GD = 2/9 with λ_max(H) = 9·1.
    assert!((value(&s, "eta_max_gd").parse::<f64>().unwrap() - 2.0 / 9.0).abs() < 1e-15);
    assert_eq!(value(&s, "eta_ratio").parse::<f64>().unwrap(), 2.0);
    assert!(dir.path().join("out/spectrum.txt").exists());
}

#[test]
fn spectrum_reads_matrix_and_input_from_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("g.txt"), "1 2\n1 0\n").unwrap();
    std::fs::write(dir.path().join("x.txt"), "2 2\n2 0\n0 1\n").unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "[spectrum]\nmatrix = \"g.txt\"\ninput = \"x.txt\"\n",
    )
    .unwrap();
    let o = run(&["spectrum", "--config", "c.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert_eq!(value(&s, "lam_max_a").parse::<f64>().unwrap(), 4.0);
    assert_eq!(value(&s, "lam_min_a").parse::<f64>().unwrap(), 1.0);
}

#[test]
fn spectrum_missing_or_malformed_matrix_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["spectrum", "nope.txt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.txt"));

    std::fs::write(dir.path().join("bad.txt"), "2 2\n1 2 3\n").unwrap();
    assert_eq!(
        run(&["spectrum", "bad.txt"], dir.path()).status.code(),
        Some(2)
    );

    assert_eq!(run(&["spectrum"], dir.path()).status.code(), Some(2));
}

#[test]
fn lr_sweep_writes_one_row_per_cell_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut tables = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("s{i}"));
        let o = bin()
            .args([
                "lr-sweep",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .env("SPECTRAL_OPT_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        tables.push(std::fs::read_to_string(out.join("sweep.csv")).unwrap());
        assert!(out.join("stability.csv").exists());
    }
    assert_eq!(tables[0], tables[1]);
    let lines: Vec<&str> = tables[0].lines().collect();
    // 2 optimizers × 2 rates × 2 seeds.
    assert_eq!(lines.len(), 1 + 8);
    assert!(lines[0].starts_with("optimizer,eta,seed,diverged,diverged_step,final_loss,initial_loss,step10_loss,norm_growth_10,milestone_"));
}

#[test]
fn seed_flag_changes_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let read = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = run(
            &[
                "lr-sweep",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                seed,
            ],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0));
        std::fs::read_to_string(out.join("sweep.csv")).unwrap()
    };
    assert_eq!(read("7", "a"), read("7", "b"));
    assert_ne!(read("7", "c"), read("8", "d"));
}

#[test]
fn converge_writes_a_trace_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("c");
    let o = run(
        &[
            "converge",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for opt in ["sgd", "muon"] {
        for seed in 0..2 {
            let t =
                std::fs::read_to_string(out.join(format!("trace_{opt}_seed{seed}.csv"))).unwrap();
            let header = t.lines().next().unwrap();
            assert_eq!(
                header,
                "step,loss,gap,r_t,eta,alpha_tilde,beta_tilde,grad_fro,param_fro,val_acc,epoch"
            );
            // Three epoch rows, each with an accuracy.
            let epochs = t.lines().skip(1).filter(|l| !l.ends_with(',')).count();
            assert_eq!(epochs, 3);
        }
    }
    let m = std::fs::read_to_string(out.join("milestones.csv")).unwrap();
    assert_eq!(m.lines().count(), 1 + 4);
    assert!(stdout(&o).contains("l_star="));
}

#[test]
fn converge_quadratic_mode() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("q.toml");
    std::fs::write(
        &p,
        "[converge]\nmode = \"quadratic\"\nsteps = 30\nm = 2\nn = 3\n[train]\nseeds = [0, 1, 2]\n",
    )
    .unwrap();
    let out = dir.path().join("q");
    let o = run(
        &[
            "converge",
            "--config",
            p.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let traces = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("trace_")
        })
        .count();
    assert_eq!(traces, 6);
    let t = std::fs::read_to_string(out.join("trace_muon_seed1.csv")).unwrap();
    // Muon rows after step 0 carry both preconditioned extremes.
    let row: Vec<&str> = t.lines().nth(2).unwrap().split(',').collect();
    assert!(!row[5].is_empty() && !row[6].is_empty());
    assert_eq!(
        std::fs::read_to_string(out.join("summary.csv"))
            .unwrap()
            .lines()
            .count(),
        7
    );
}
