fn main() {
    std::process::exit(swarmraft::cli::main());
}
