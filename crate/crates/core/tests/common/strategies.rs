//! Proptest strategies and the reference GOOSE PDU.

use proptest::prelude::*;
use stationbus::codec::*;

pub fn mac() -> impl Strategy<Value = MacAddress> {
    any::<[u8; 6]>().prop_map(MacAddress)
}

pub fn vlan() -> impl Strategy<Value = Option<VlanTag>> {
    proptest::option::of((0u8..8, any::<bool>(), 0u16..4096).prop_map(|(p, d, v)| VlanTag::new(p, d, v).unwrap()))
}

pub fn visible(max: usize) -> impl Strategy<Value = String> {
    proptest::string::string_regex(&format!("[ -~]{{1,{max}}}")).unwrap()
}

pub fn bit_string() -> impl Strategy<Value = BitString> {
    (0usize..64).prop_flat_map(|bits| {
        proptest::collection::vec(any::<u8>(), bits.div_ceil(8)).prop_map(move |mut bytes| {
            let unused = bytes.len() * 8 - bits;
            if let Some(last) = bytes.last_mut() {
                *last &= !((1u16 << unused) as u8).wrapping_sub(1);
            }
            BitString::new(bits, bytes).unwrap()
        })
    })
}

pub fn data_value() -> impl Strategy<Value = DataValue> {
    prop_oneof![
        any::<bool>().prop_map(DataValue::Boolean),
        any::<i64>().prop_map(DataValue::Integer),
        bit_string().prop_map(DataValue::BitString),
        visible(40).prop_map(DataValue::VisibleString),
    ]
}

prop_compose! {
    pub fn goose_pdu()(
        gocb_ref in visible(MAX_STRING_LEN),
        tatl in 1u32..,
        dat_set in visible(MAX_STRING_LEN),
        go_id in visible(MAX_STRING_LEN),
        seconds in any::<u32>(),
        fraction in 0u32..(1 << 24),
        quality in any::<u8>(),
        st_num in any::<u32>(),
        sq_num in any::<u32>(),
        test in any::<bool>(),
        conf_rev in any::<u32>(),
        nds_com in any::<bool>(),
        all_data in proptest::collection::vec(data_value(), 0..12),
    ) -> GoosePdu {
        GoosePdu {
            gocb_ref,
            time_allowed_to_live: tatl,
            dat_set,
            go_id,
            t: UtcTime { seconds, fraction, quality },
            st_num,
            sq_num,
            test,
            conf_rev,
            nds_com,
            num_dat_set_entries: all_data.len() as u32,
            all_data,
        }
    }
}

pub fn sv_asdu() -> impl Strategy<Value = SvAsdu> {
    (
        visible(64),
        proptest::option::of(visible(64)),
        any::<u16>(),
        any::<u32>(),
        any::<u8>(),
        any::<[(i32, u32); SAMPLES_PER_ASDU]>(),
    )
        .prop_map(|(sv_id, dat_set, smp_cnt, conf_rev, smp_synch, raw)| SvAsdu {
            sv_id,
            dat_set,
            smp_cnt,
            conf_rev,
            smp_synch,
            samples: raw.map(|(value, quality)| SvSample { value, quality }),
        })
}

/// The captured feeder-protection frame: 164-byte GOOSE payload, 178 on
/// the wire. allData is (boolean, boolean, 48-bit bit string).
pub fn golden_pdu() -> GoosePdu {
    GoosePdu {
        gocb_ref: "AAL1J1Q01A1LD0/LLN0$GO$gcbmydataset".into(),
        time_allowed_to_live: 11000,
        dat_set: "AAL1J1Q01A1LD0/LLN0$mydataset".into(),
        go_id: "AAL1J1Q01A1LD0/LLN0.gcbmydataset".into(),
        t: UtcTime::from_unix_nanos(1_436_538_296_903_729_915, 0x0A),
        st_num: 1,
        sq_num: 857,
        test: false,
        conf_rev: 200,
        nds_com: false,
        num_dat_set_entries: 3,
        all_data: vec![
            DataValue::Boolean(true),
            DataValue::Boolean(false),
            DataValue::BitString(BitString::zeros(48)),
        ],
    }
}
