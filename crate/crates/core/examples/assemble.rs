//! Assembles a small bomber, prints its bytes and disassembles them again.

use cgforge::isa::{assemble, disassemble};

fn main() {
    let src = "@start:
mov ax, 0xcccc
mov di, 0x200
l1:
stosw
add di, 6
jmp l1
@end:";
    let image = assemble(src).expect("valid source");
    let hex: Vec<String> = image.bytes.iter().map(|b| format!("{:02x}", b)).collect();
    println!("{} bytes, start at {}: {}", image.len(), image.start_offset, hex.join(" "));
    print!("{}", disassemble(&image.bytes, 0));
}
