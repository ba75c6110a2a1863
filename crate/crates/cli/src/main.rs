fn main() {
    std::process::exit(adaptmesh_cli::app::run(std::env::args_os()));
}
