//! Writes a model and a simulated path as JSON artifacts and reads them
//! back.

use mcmarket::fixtures;
use mcmarket::io::{envelope, load_model, load_path, Header, RunConfig};
use mcmarket::simulate::{simulate_path, Start};

fn main() -> mcmarket::Result<()> {
    let m = fixtures::twostate();
    let dir = std::env::temp_dir().join("mcmarket-example");
    std::fs::create_dir_all(&dir)?;
    let run = RunConfig {
        command: "example".into(),
        model: None,
        seed: Some(9),
        n_paths: Some(1),
        n_max: None,
        horizon: None,
        out: None,
        format: "json".into(),
    };
    let header = Header::new(&m, run);
    let model_file = dir.join("model.json");
    std::fs::write(&model_file, envelope(&header, "model", &m.to_config())?)?;
    let path = simulate_path(&m, &Start::Model, 9)?;
    let path_file = dir.join("path.json");
    std::fs::write(&path_file, envelope(&header, "path", &path)?)?;

    let back = load_model(model_file.to_str().unwrap())?.model;
    let path_back = load_path(&path_file, 0)?;
    println!("config hash {}", header.config_sha256);
    println!("model round trip: {}", back.to_config() == m.to_config());
    println!("path round trip: {}", path_back == path);
    println!("files in {}", dir.display());
    Ok(())
}
