fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR is set");
    let header = std::path::Path::new(&crate_dir).join("include/hmflow.h");
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_language(cbindgen::Language::C)
        .with_include_guard("HMFLOW_H")
        .with_cpp_compat(true)
        .generate()
        .expect("generate C bindings")
        .write_to_file(header);
    println!("cargo:rerun-if-changed=src/lib.rs");
}
