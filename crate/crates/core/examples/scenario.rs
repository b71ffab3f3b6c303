//! Writes a synthetic network and demand file pair.
//!
//! ```text
//! cargo run --example scenario -- rush-hour <seed> <vehicles> <dir>
//! cargo run --example scenario -- grid <seed> <vehicles> <dir>
//! ```

use std::path::PathBuf;
use std::{env, fs, process};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cutc_core::io::{write_demand, write_network};
use cutc_core::scenario::{grid_network, random_demand, rush_hour, GridSpec};

fn main() {
    let args: Vec<String> = env::args().skip(1).collect();
    let [kind, seed, vehicles, dir] = args.as_slice() else {
        eprintln!("usage: scenario rush-hour|grid <seed> <vehicles> <dir>");
        process::exit(2);
    };
    let seed: u64 = seed.parse().expect("seed");
    let vehicles: usize = vehicles.parse().expect("vehicle count");
    let (net, demand) = match kind.as_str() {
        "rush-hour" => rush_hour(seed, vehicles),
        "grid" => {
            let net = grid_network(&GridSpec::default());
            let demand = random_demand(&net, vehicles, 2.0, &mut ChaCha8Rng::seed_from_u64(seed));
            (net, demand)
        }
        other => {
            eprintln!("unknown scenario `{other}`");
            process::exit(2);
        }
    };
    let dir = PathBuf::from(dir);
    fs::create_dir_all(&dir).expect("create output directory");
    fs::write(dir.join("network.txt"), write_network(&net)).expect("write network");
    fs::write(dir.join("demand.txt"), write_demand(&demand, &net)).expect("write demand");
}
