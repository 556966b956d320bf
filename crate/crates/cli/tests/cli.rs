use std::path::Path;
use std::process::{Command, Output};

fn dte(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dte"))
        .args(args)
        .env_remove("DTE_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn encode_worked_example() {
    let x = dte(&[
        "encode",
        "--values",
        "0.491,0.327,-0.652,-1.096,-0.023",
        "--depth",
        "3",
    ]);
    assert!(x.status.success());
    assert_eq!(stdout(&x), "11000\n00101\n11011\n");

    let y = dte(&[
        "encode",
        "--values",
        "-0.231,1.269,-0.461,-0.898,-0.393",
        "--variance",
        "1.5",
        "--depth",
        "3",
    ]);
    assert_eq!(stdout(&y), "01000\n11101\n10010\n");
}

#[test]
fn encode_tie_at_one_half() {
    let o = dte(&["encode", "--values", "0.0", "--depth", "2"]);
    assert_eq!(stdout(&o), "1\n0\n");
}

#[test]
fn encode_from_file_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    std::fs::write(&input, "0.491\n0.327\n-0.652\n-1.096\n-0.023\n").unwrap();
    let output = dir.path().join("bits.txt");
    let o = dte(&[
        "encode",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(
        std::fs::read_to_string(output).unwrap(),
        "11000\n00101\n11011\n"
    );
}

#[test]
fn encode_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.txt");
    std::fs::write(&input, "1.0\n2.0, abc\n").unwrap();
    let o = dte(&["encode", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2, column 6"), "{}", stderr(&o));

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(
        dte(&["encode", "--input", empty.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dte(&["encode", "--values", "1", "--depth", "0"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        dte(&["encode", "--values", "1", "--depth", "33"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(dte(&["encode"]).status.code(), Some(2));
}

const SUB: [&str; 13] = [
    "subchannels",
    "--detection",
    "het",
    "--snr-db",
    "0",
    "--depth",
    "4",
    "--n",
    "10000",
    "--repeats",
    "20",
    "--seed",
    "7",
];

#[test]
fn subchannels_rows_and_determinism() {
    let a = dte(&SUB);
    assert!(a.status.success(), "{}", stderr(&a));
    let text = stdout(&a);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "snr_db,detection,level,p,p_se,c_bsc,mi_dr,mi_dr_se,mi_rr,mi_rr_se"
    );
    assert_eq!(lines.len(), 5);
    assert!(!text.contains("NaN"));

    let b = dte(&SUB);
    assert_eq!(a.stdout, b.stdout);

    let mut one = vec!["--threads", "1"];
    one.extend_from_slice(&SUB);
    assert_eq!(dte(&one).stdout, a.stdout);
}

#[test]
fn subchannels_seed_from_environment() {
    let mut args: Vec<&str> = SUB[..11].to_vec();
    args[10] = "3";
    let with_env = Command::new(env!("CARGO_BIN_EXE_dte"))
        .args(&args)
        .env("DTE_SEED", "7")
        .output()
        .unwrap();
    let mut small = SUB.to_vec();
    small[10] = "3";
    assert_eq!(with_env.stdout, dte(&small).stdout);
}

#[test]
fn unreachable_snr_exits_three() {
    let o = dte(&[
        "subchannels",
        "--snr-db",
        "40",
        "--detection",
        "hom",
        "--mod-variance",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("unreachable SNR"), "{}", stderr(&o));
}

#[test]
fn invalid_flags_exit_two() {
    let o = dte(&[
        "subchannels",
        "--snr-db",
        "0",
        "--detection",
        "het",
        "--n",
        "50",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = dte(&[
        "subchannels",
        "--snr-db",
        "0",
        "--detection",
        "het",
        "--k",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = dte(&["subchannels", "--snr-db", "0", "--detection", "xyz"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_empty_grid_exits_two() {
    assert_eq!(dte(&["sweep", "--grid", ""]).status.code(), Some(2));
    assert_eq!(dte(&["sweep"]).status.code(), Some(2));
    assert_eq!(
        dte(&[
            "sweep",
            "--snr-min",
            "1",
            "--snr-max",
            "0",
            "--snr-step",
            "0.5"
        ])
        .status
        .code(),
        Some(2)
    );
}

fn sweep_into(path: &Path, format: &str, threads: &str) -> Output {
    dte(&[
        "--threads",
        threads,
        "sweep",
        "--snr-min",
        "-2",
        "--snr-max",
        "4",
        "--snr-step",
        "1",
        "--depths",
        "2,3",
        "--detections",
        "het,hom",
        "--n",
        "1000",
        "--repeats",
        "3",
        "--format",
        format,
        "--output",
        path.to_str().unwrap(),
    ])
}

#[test]
fn sweep_outputs_are_deterministic_and_parse() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = sweep_into(&a, "csv", "1");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    // het tops out at 2.97 dB.
    assert!(stderr(&o).contains("warning: skipped 3 dB (het)"));
    assert!(stderr(&o).contains("crossing"));
    assert!(sweep_into(&b, "csv", "4").status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let rows = dte_core::io::read_sweep_csv(std::fs::File::open(&a).unwrap()).unwrap();
    // het: 5 reachable SNRs, hom: 7, two depths each.
    assert_eq!(rows.len(), (5 + 7) * 2);

    let j = dir.path().join("a.json");
    assert!(sweep_into(&j, "json", "2").status.success());
    let sweep = dte_core::io::read_sweep_json(std::fs::File::open(&j).unwrap()).unwrap();
    let from_json: Vec<_> = sweep
        .points
        .iter()
        .map(dte_core::io::EfficiencyRow::from)
        .collect();
    assert_eq!(from_json, rows);
}

#[test]
fn simulate_writes_raw_keys() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("keys.csv");
    let o = dte(&[
        "simulate",
        "--detection",
        "het",
        "--snr-db",
        "-3",
        "--n",
        "200",
        "--seed",
        "4",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pair = dte_core::io::read_raw_keys(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(pair.len(), 200);
    assert_eq!(pair.seed, 4);
    assert!((dte_core::channel::snr_db(&pair.params) + 3.0).abs() < 1e-9);
}

#[test]
fn validate_quick_passes_and_mutation_is_caught() {
    let o = dte(&["validate", "--quick"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(
        stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(),
        7
    );

    let m = dte(&["validate", "--quick", "--mutate-bsc-sign"]);
    assert_eq!(m.status.code(), Some(1));
    assert!(stderr(&m).contains("dpi_ordering"), "{}", stderr(&m));
    assert!(stdout(&m).contains("FAIL dpi_ordering"));
}
