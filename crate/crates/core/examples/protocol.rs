//! The default 13-electrode protocol, its text form and TDM subsets.
//!
//! cargo run --example protocol

use soft_eit::eit::ElectrodeArray;
use soft_eit::protocol::{default_protocol_13, Protocol};

fn main() -> soft_eit::Result<()> {
    let p = default_protocol_13();
    let text = p.to_text();
    print!("{text}");
    assert_eq!(Protocol::from_text(&text)?, p);

    for k in [1, 4, 8] {
        let sub = p.subset(k)?;
        println!("{k} channel(s): first {}, last {}", sub.channels[0], sub.channels[k - 1]);
    }

    let small = ElectrodeArray {
        n_electrodes: 8,
        ..ElectrodeArray::default()
    };
    match p.validate(&small) {
        Ok(()) => println!("valid on 8 electrodes"),
        Err(v) => println!("{} violation(s) on 8 electrodes, e.g. {}", v.len(), v[0]),
    }
    Ok(())
}
