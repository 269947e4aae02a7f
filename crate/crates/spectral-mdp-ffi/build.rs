use std::path::Path;

fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR");
    let header = Path::new(&crate_dir).join("include").join("spectral_mdp.h");
    let bindings = cbindgen::generate(&crate_dir).expect("header generation");
    bindings.write_to_file(&header);
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
