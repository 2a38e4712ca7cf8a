fn main() {
    std::process::exit(sensor_select::cli::run(std::env::args_os()));
}
