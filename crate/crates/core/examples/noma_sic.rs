//! Power ladder and SIC on a few msg3 superpositions.

use shra::noma::{power_levels, sic_decode_with, SicPolicy, UplinkMessage};
use shra::signal::DeviceId;

fn main() -> shra::Result<()> {
    let levels = power_levels(1.0, 3)?;
    println!("receive powers for gamma = 1, A = 3: {:?}", levels.levels());

    let cases: [&[usize]; 4] = [&[1, 2, 3], &[1, 3], &[1, 2, 2], &[2, 2, 3]];
    for case in cases {
        let msgs: Vec<UplinkMessage> = case
            .iter()
            .enumerate()
            .map(|(i, &l)| UplinkMessage {
                device_id: DeviceId(i as u32),
                resource_block: 0,
                power_level: l,
            })
            .collect();
        for policy in [SicPolicy::Abort, SicPolicy::SkipAndContinue] {
            let r = sic_decode_with(&msgs, &levels, policy)?;
            println!(
                "levels {case:?} {policy:?}: decoded {:?}, failed {:?}",
                r.decoded.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
                r.failed.iter().map(|d| d.to_string()).collect::<Vec<_>>()
            );
        }
    }
    Ok(())
}
