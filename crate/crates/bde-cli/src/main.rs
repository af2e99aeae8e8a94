fn main() { println!("bde"); }
