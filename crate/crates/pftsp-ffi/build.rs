fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    #[cfg(feature = "generate-header")]
    {
        let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("manifest dir");
        cbindgen::generate(&crate_dir)
            .expect("generating pftsp.h")
            .write_to_file(format!("{crate_dir}/include/pftsp.h"));
    }
}
