#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use affectmorph::fixtures::write_subject_dir;
use affectmorph::landmarks::CanonicalFrame;
use affectmorph::{Expression, Point};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_affectmorph"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn small_frame() -> CanonicalFrame {
    CanonicalFrame {
        width: 96,
        height: 96,
        left_eye: Point::new(33.0, 43.0),
        right_eye: Point::new(63.0, 43.0),
        fill: [128, 128, 128],
    }
}

/// Writes `config.json` under `root` with `in/` and `out/` roots and the given frame.
pub fn write_config(root: &Path, frame: &CanonicalFrame, extra: &str) -> PathBuf {
    let path = root.join("config.json");
    let text = format!(
        r#"{{"input_root": "in", "output_root": "out", "frame": {{"width": {}, "height": {}, "left_eye": {{"x": {}, "y": {}}}, "right_eye": {{"x": {}, "y": {}}}, "fill": [128, 128, 128]}}{extra}}}"#,
        frame.width, frame.height, frame.left_eye.x, frame.left_eye.y, frame.right_eye.x, frame.right_eye.y
    );
    std::fs::write(&path, text).unwrap();
    path
}

pub fn add_subject(root: &Path, id: &str, seed: u64, frame: &CanonicalFrame, expressions: &[Expression], raw: bool) {
    write_subject_dir(&root.join("in").join(id), seed, frame, expressions, raw, true).unwrap();
}

/// Image files under `dir`, recursively, sorted.
pub fn images(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "png") {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}
