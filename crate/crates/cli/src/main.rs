fn main() {
    println!("dtmsim");
}
