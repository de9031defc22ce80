// LAPACK/BLAS symbols for ndarray-linalg come from the system OpenBLAS.
fn main() {
    println!("cargo:rustc-link-lib=openblas");
}
