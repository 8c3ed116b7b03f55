//! Regenerates the bundled procedural models under `data/`.
//!
//! ```sh
//! cargo run -p corrgroup --example export_shapes -- data/
//! ```

use corrgroup::shapes::{bumpy_sphere, bumpy_torus};
use corrgroup::{compute_resolution, save_ply};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data".into());
    let dir = std::path::PathBuf::from(dir);
    std::fs::create_dir_all(&dir).expect("create output directory");

    for (name, cloud) in [
        ("bumpy_torus", bumpy_torus(8000, 7)),
        ("bumpy_sphere", bumpy_sphere(6000, 11)),
    ] {
        let path = dir.join(format!("{name}.ply"));
        save_ply(&cloud, &path).expect("write PLY");
        println!(
            "{}: {} points, resolution {:.5}",
            path.display(),
            cloud.len(),
            compute_resolution(&cloud).expect("resolution")
        );
    }
}
