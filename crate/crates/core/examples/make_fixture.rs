//! Writes the deterministic demo dataset to a directory:
//! `cargo run -p graspset-core --example make_fixture -- /tmp/demo`

fn main() {
    let root = std::env::args().nth(1).unwrap_or_else(|| "fixture".into());
    let info = graspset::fixture::write_fixture(std::path::Path::new(&root)).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        std::process::exit(1);
    });
    println!("wrote {} grasps; config at {}", info.grasps.len(), info.config.display());
}
