//! Writes the builtin benchmark models as PLY files, plus `bench.cfg`, a
//! benchmark config that places them the same way as
//! `BenchmarkConfig::builtin_scene`.
//!
//! cargo run --release --example make_models -- <out_dir>

use std::path::PathBuf;

use hgnd::bench::{BenchmarkConfig, ModelSource};
use hgnd::mesh::ply::write_ply;
use hgnd::shapes::{benchmark_model, BENCHMARK_MODEL_NAMES};

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "models".into()));
    std::fs::create_dir_all(&dir).expect("create output directory");
    let mut config = BenchmarkConfig::builtin_scene();
    config.models.clear();
    for name in BENCHMARK_MODEL_NAMES {
        let mesh = benchmark_model(name).expect("builtin name");
        let file = format!("{name}.ply");
        write_ply(&mesh, dir.join(&file)).expect("write model");
        println!("{file}: {} vertices, {} triangles", mesh.vertex_count(), mesh.triangle_count());
        config.models.push(ModelSource::File(file.into()));
    }
    std::fs::write(dir.join("bench.cfg"), config.to_text()).expect("write config");
}
