fn main() {
    println!("resetloop");
}
