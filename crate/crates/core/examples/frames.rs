//! Encodes a Niagara syndrome frame, prints its wire bytes, and shows that
//! a truncated copy is refused.

use qkdnet::bits::to_hex;
use qkdnet::net::frame::{MsgType, PublicMessage};

fn main() {
    let mut msg = PublicMessage::new(MsgType::EcNiagaraSyndrome, 1, 7, vec![0xDE, 0xAD, 0xBE, 0xEF]);
    let plain = msg.encode();
    println!("plain  {} bytes  {}", plain.len(), to_hex(&plain));
    msg.tag = Some([0x11; 8]);
    let tagged = msg.encode();
    println!("tagged {} bytes  {}", tagged.len(), to_hex(&tagged));

    let back = PublicMessage::decode(&tagged).expect("well-formed frame");
    println!("round trip  {}", back == msg);
    println!("truncated   {:?}", PublicMessage::decode(&tagged[..tagged.len() - 1]).err());
}
