//! Drive the command-line front end in-process: write a report, then render
//! it.

use dissipacert::cli::run_args;

fn main() {
    let dir = std::env::temp_dir().join("dissipacert-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let report = dir.join("unstable_plant.json");
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/examples");
    let system = format!("{data}/unstable_plant.json");
    let t = format!("{data}/unstable_plant_T.json");

    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let code = run_args(
        [
            "dissipacert",
            "check",
            "--kind",
            "sof",
            "--system",
            &system,
            "--beta",
            "0.5",
            "--P",
            "identity",
            "--T",
            &t,
            "--out",
            report.to_str().unwrap(),
        ],
        &mut out,
        &mut err,
    );
    println!("exit status {code}");
    run_args(["dissipacert", "explain", report.to_str().unwrap()], &mut out, &mut err);
}
