#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn powgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_powgame"))
        .args(args)
        .output()
        .expect("failed to launch powgame")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn days_in_month(y: i32, m: u32) -> u32 {
    match m {
        2 if (y % 4 == 0 && y % 100 != 0) || y % 400 == 0 => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    }
}

/// Daily CSV, constant within each calendar month, where hash-rate monthly means follow
/// the three-month-lagged reward means raised to `beta`. Covers Jan 2017 to Apr 2021.
pub fn power_law_csv(beta: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let months: Vec<(i32, u32)> = (0..55).map(|k| (2016 + (9 + k) / 12, (9 + k) as u32 % 12 + 1)).collect();
    let reward: Vec<f64> = months.iter().map(|_| rng.gen_range(1.0e6..3.0e6)).collect();
    let price: Vec<f64> = months.iter().map(|_| rng.gen_range(1.0e3..6.0e4)).collect();
    let mut out = String::from("date,hash_rate,reward_usd,price_usd\n");
    for k in 3..months.len() {
        let (y, m) = months[k];
        let hash = 50.0 * reward[k - 3].powf(beta);
        for d in 1..=days_in_month(y, m) {
            out.push_str(&format!("{y:04}-{m:02}-{d:02},{hash},{},{}\n", reward[k], price[k]));
        }
    }
    out
}

pub fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}
