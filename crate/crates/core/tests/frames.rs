use qkdnet::bits::{from_hex, to_hex};
use qkdnet::net::frame::{MsgType, PublicMessage};

struct Golden {
    name: String,
    msg: PublicMessage,
    hex: String,
}

fn load() -> Vec<Golden> {
    include_str!("golden/frames.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('|').map(str::trim).collect();
            let t = u8::from_str_radix(f[1].trim_start_matches("0x"), 16).unwrap();
            let mut msg = PublicMessage::new(
                MsgType::from_byte(t).unwrap(),
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
                from_hex(f[4]).unwrap(),
            );
            if f[5] != "-" {
                msg.tag = Some(from_hex(f[5]).unwrap().try_into().unwrap());
            }
            Golden {
                name: f[0].to_string(),
                msg,
                hex: f[6].to_string(),
            }
        })
        .collect()
}

#[test]
fn golden_frames_encode_bit_exactly() {
    let all = load();
    assert_eq!(all.len(), 4);
    for g in all {
        assert_eq!(to_hex(&g.msg.encode()), g.hex, "{}", g.name);
        let decoded = PublicMessage::decode(&from_hex(&g.hex).unwrap()).unwrap();
        assert_eq!(decoded, g.msg, "{}", g.name);
    }
}

#[test]
fn concatenated_frames_split_cleanly() {
    let all = load();
    let stream: Vec<u8> = all.iter().flat_map(|g| g.msg.encode()).collect();
    let mut at = 0;
    for g in &all {
        let (msg, len) = PublicMessage::decode_prefix(&stream[at..]).unwrap();
        assert_eq!(msg, g.msg);
        at += len;
    }
    assert_eq!(at, stream.len());
}
