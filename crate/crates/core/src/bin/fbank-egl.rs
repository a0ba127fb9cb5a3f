fn main() {
    fbank_egl::cli::main()
}
