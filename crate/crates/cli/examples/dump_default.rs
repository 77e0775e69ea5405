fn main() {
    print!("{}", strider_cli::RunConfig::default().to_toml_string().unwrap());
}
