//! Write a demonstration set, reload it and check byte-exact resaving.

use gelfusion::data_io::{load_dataset, load_episode, save_episode};
use gelfusion::harness::gen_demos;
use gelfusion::simenv::{EnvConfig, Task};

fn main() -> gelfusion::Result<()> {
    let dir = std::env::temp_dir().join("gelfusion_dataset_example");
    let m = gen_demos(Task::Pick, 5, 0, &EnvConfig::default(), &dir)?;
    print!("{}", m.to_text());
    let data = load_dataset(&dir)?;
    let steps: usize = data.traces.iter().map(|t| t.len()).sum();
    println!("loaded {} episodes, {steps} steps", data.traces.len());
    let first = dir.join(&m.episodes[0].0);
    let (trace, env) = load_episode(&first)?;
    let copy = dir.join("copy.gfds");
    save_episode(&copy, &trace, &env)?;
    println!("resave identical: {}", std::fs::read(&first)? == std::fs::read(&copy)?);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
