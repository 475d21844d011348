//! Decodes bytes into an order stream and checks the book against the
//! reference matcher.

#![no_main]

#[path = "../../crates/core/tests/support/naive_book.rs"]
mod naive_book;

use libfuzzer_sys::fuzz_target;
use marketgym_core::book::{OrderId, Side};
use marketgym_core::kernel::AgentId;
use naive_book::{compare_with_reference, Op};

fuzz_target!(|data: &[u8]| {
    let mut ops = Vec::new();
    let mut issued: Vec<OrderId> = Vec::new();
    for (i, chunk) in data.chunks_exact(4).enumerate() {
        let id = OrderId::new(AgentId((chunk[0] >> 4) as u32 % 6), i as u64);
        let side = if chunk[0] & 1 == 0 { Side::Buy } else { Side::Sell };
        let qty = chunk[1] as u64;
        match (chunk[0] >> 1) & 3 {
            0 | 1 => {
                issued.push(id);
                ops.push(Op::Limit { id, side, qty, price: 100 + (chunk[2] % 20) as i64 });
            }
            2 => ops.push(Op::Market { id, side, qty }),
            _ => match issued.get(chunk[3] as usize % issued.len().max(1)) {
                Some(&target) => ops.push(Op::Cancel(target)),
                None => ops.push(Op::Cancel(id)),
            },
        }
    }
    if let Err(e) = compare_with_reference(&ops) {
        panic!("{e}");
    }
});
