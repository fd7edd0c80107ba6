//! Extended CIFAR-10 check. Needs the binary batches and several hours:
//!
//! ```text
//! DPSDA_DATA_ROOT=/data/cifar-10-batches-bin \
//!     cargo test --release -p dpsda-cli --test cifar_extended -- --ignored --nocapture
//! ```

use std::path::PathBuf;
use std::process::Command;

use dpsda_core::fl::checkpoint::read_run;
use dpsda_core::fl::Algorithm;

#[test]
#[ignore = "hours of CPU time and the CIFAR-10 dataset"]
fn cifar_ordering_single_seed() {
    let root = std::env::var_os("DPSDA_DATA_ROOT").expect("set DPSDA_DATA_ROOT");
    let out = std::env::var_os("DPSDA_CIFAR_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dpsda-cifar"));
    let status = Command::new(env!("CARGO_BIN_EXE_dpsda"))
        .args(["reproduce", "--out"])
        .arg(&out)
        .arg("--data-root")
        .arg(&root)
        .arg("seeds=[0]")
        .status()
        .unwrap();
    assert!(status.success());

    let runs = out.join("runs");
    let accuracy = |alg: Algorithm| -> f64 {
        let prefix = format!("{}-", alg.name());
        let dir = std::fs::read_dir(&runs)
            .unwrap()
            .map(|e| e.unwrap().path())
            .find(|p| {
                p.file_name()
                    .unwrap()
                    .to_string_lossy()
                    .starts_with(&prefix)
            })
            .expect("run directory");
        read_run(&dir).unwrap().last().unwrap().accuracy
    };
    let [fedavg, fedprox, dpsda] = Algorithm::ALL.map(accuracy);
    println!("FedAvg {fedavg:.4}  FedProx {fedprox:.4}  DPSDA-FL {dpsda:.4}");
    assert!(dpsda > fedprox && fedprox > fedavg);
    assert!((0.20..=0.40).contains(&fedavg));
}
