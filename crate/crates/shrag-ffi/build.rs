fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR set");
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(format!("{crate_dir}/include/shrag.h"));
        }
        Err(cbindgen::Error::ParseSyntaxError { .. }) => {
            // Syntax errors surface through rustc with better messages.
        }
        Err(e) => panic!("unable to generate C header: {e}"),
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
