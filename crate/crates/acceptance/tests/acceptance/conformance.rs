//! Codec round trips through the full link/transport/application stack, the
//! CRC against the bit-serial oracle, and a fuzz pass over every decoder.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};

use gridwire_acceptance::{ensure, Verdict};
use gridwire_core::proto::*;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::oracle::{crc_bit_serial, self_check};

const ROUND_TRIPS: u32 = 10_000;
const CRC_BLOCKS: usize = 10_000;
const FUZZ_CASES: usize = 100_000;

pub fn run() -> Verdict {
    self_check()?;
    let (trips, covered) = round_trips()?;
    let crcs = crc_blocks()?;
    let fuzzed = fuzz()?;
    Ok(format!(
        "{trips} fragments round-tripped over {covered} variations; {crcs} CRC blocks match; \
         {fuzzed} fuzz cases without a crash"
    ))
}

fn flags() -> impl Strategy<Value = Flags> {
    any::<u8>().prop_map(Flags)
}

/// Bit 7 of a binary's flag octet carries the state itself.
fn binary_flags() -> impl Strategy<Value = Flags> {
    (0u8..0x80).prop_map(Flags)
}

fn time() -> impl Strategy<Value = Timestamp> {
    (0u64..=Timestamp::MAX).prop_map(Timestamp)
}

fn float() -> impl Strategy<Value = f32> {
    any::<f32>().prop_filter("NaN never compares equal", |v| !v.is_nan())
}

fn status() -> impl Strategy<Value = CommandStatus> {
    any::<u8>().prop_map(CommandStatus::from_u8)
}

fn value(v: Variation) -> BoxedStrategy<PointValue> {
    use Variation::*;
    match v {
        BinaryInput | BinaryOutputStatus => (any::<bool>(), binary_flags())
            .prop_map(|(value, flags)| PointValue::Binary { value, flags, time: None })
            .boxed(),
        BinaryEventTime => (any::<bool>(), binary_flags(), time())
            .prop_map(|(value, flags, t)| PointValue::Binary { value, flags, time: Some(t) })
            .boxed(),
        AnalogInput32 | AnalogOutputStatus32 => (any::<i32>(), flags())
            .prop_map(|(value, flags)| PointValue::AnalogInt { value, flags, time: None })
            .boxed(),
        AnalogEvent32Time => (any::<i32>(), flags(), time())
            .prop_map(|(value, flags, t)| PointValue::AnalogInt { value, flags, time: Some(t) })
            .boxed(),
        AnalogInputFloat | AnalogOutputStatusFloat => (float(), flags())
            .prop_map(|(value, flags)| PointValue::AnalogFloat { value, flags, time: None })
            .boxed(),
        AnalogEventFloatTime => (float(), flags(), time())
            .prop_map(|(value, flags, t)| PointValue::AnalogFloat { value, flags, time: Some(t) })
            .boxed(),
        Counter32 => (any::<u32>(), flags())
            .prop_map(|(value, flags)| PointValue::Counter { value, flags })
            .boxed(),
        Variation::Crob => (any::<u8>(), any::<u8>(), any::<u32>(), any::<u32>(), status())
            .prop_map(|(code, count, on_time_ms, off_time_ms, status)| {
                PointValue::Crob(gridwire_core::proto::Crob {
                    code: ControlCode(code),
                    count,
                    on_time_ms,
                    off_time_ms,
                    status,
                })
            })
            .boxed(),
        AnalogOutputFloat => (float(), status())
            .prop_map(|(value, status)| PointValue::AnalogCommand { value, status })
            .boxed(),
        TimeAndDate => time().prop_map(PointValue::Time).boxed(),
        other => unreachable!("{other:?} carries no values"),
    }
}

fn ranged(vars: Vec<Variation>) -> impl Strategy<Value = ObjectBlock> {
    prop::sample::select(vars).prop_flat_map(|v| {
        (0u16..600, prop::collection::vec(value(v), 1..24))
            .prop_map(move |(start, values)| ObjectBlock::ranged(v, start, values))
    })
}

fn indexed(vars: Vec<Variation>) -> impl Strategy<Value = ObjectBlock> {
    prop::sample::select(vars).prop_flat_map(|v| {
        (prop::collection::vec((any::<u16>(), value(v)), 1..12), any::<bool>()).prop_map(move |(items, narrow)| {
            let mut block = ObjectBlock::indexed(v, items);
            if narrow {
                if let ObjectBody::IndexedValues(items) = &mut block.body {
                    items.iter_mut().for_each(|(i, _)| *i &= 0xFF);
                }
                block.qualifier = Qualifier::CountIndex8;
            }
            block
        })
    })
}

fn response() -> impl Strategy<Value = AppFragment> {
    use Variation::*;
    let statics = vec![
        BinaryInput,
        BinaryOutputStatus,
        Counter32,
        AnalogInput32,
        AnalogInputFloat,
        AnalogOutputStatus32,
        AnalogOutputStatusFloat,
    ];
    let events = vec![BinaryEventTime, AnalogEvent32Time, AnalogEventFloatTime];
    let block = prop_oneof![ranged(statics), indexed(events)];
    (any::<u8>(), any::<u16>(), prop::collection::vec(block, 0..8), any::<bool>()).prop_map(
        |(control, iin, objects, unsolicited)| {
            let mut f = AppFragment::response(AppControl::from_byte(control), Iin(iin), objects);
            if unsolicited {
                f.function = FunctionCode::UnsolicitedResponse;
            }
            f
        },
    )
}

fn read() -> impl Strategy<Value = AppFragment> {
    use Variation::*;
    let all = prop::sample::select(vec![
        Class0,
        Class1,
        Class2,
        Class3,
        BinaryInputAny,
        BinaryEventAny,
        BinaryOutputStatusAny,
        CounterAny,
        AnalogInputAny,
        AnalogEventAny,
        AnalogOutputStatusAny,
        BinaryInput,
        AnalogInputFloat,
        BinaryEventTime,
        AnalogEvent32Time,
    ])
    .prop_map(ObjectBlock::all);
    let range = (
        prop::sample::select(vec![BinaryInputAny, AnalogInputAny, BinaryInput, AnalogOutputStatus32, Counter32]),
        0u16..1000,
        0u16..60,
    )
        .prop_map(|(v, start, n)| ObjectBlock::range_request(v, start, start + n));
    (0u8..16, prop::collection::vec(prop_oneof![all, range], 1..6))
        .prop_map(|(seq, objects)| AppFragment::request(FunctionCode::Read, seq, objects))
}

fn control() -> impl Strategy<Value = AppFragment> {
    let function = prop::sample::select(vec![FunctionCode::Select, FunctionCode::Operate, FunctionCode::DirectOperate]);
    (
        function,
        0u8..16,
        prop::collection::vec(indexed(vec![Variation::Crob, Variation::AnalogOutputFloat]), 1..4),
    )
        .prop_map(|(function, seq, objects)| AppFragment::request(function, seq, objects))
}

fn write_time() -> impl Strategy<Value = AppFragment> {
    (0u8..16, time()).prop_map(|(seq, t)| {
        AppFragment::request(
            FunctionCode::Write,
            seq,
            vec![ObjectBlock::counted(Variation::TimeAndDate, vec![PointValue::Time(t)])],
        )
    })
}

fn fragment() -> impl Strategy<Value = AppFragment> {
    prop_oneof![4 => response(), 2 => read(), 2 => control(), 1 => write_time()]
}

/// Encodes into link frames, feeds them to a stream reader in random chunks
/// and expects the identical fragment back out of the reassembler.
fn through_stack(frag: &AppFragment, chunk: usize, transport_seq: u8) -> Result<(), TestCaseError> {
    let bytes = encode_app_fragment(frag).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(bytes.len(), frag.encoded_len());
    let (dst, src) = if frag.function.is_response() { (1, 560) } else { (560, 1) };
    let control = if frag.function.is_response() {
        LinkControl::outstation_data()
    } else {
        LinkControl::master_data()
    };
    let frames = fragment_frames(frag, control, dst, src, transport_seq).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(frames.len(), bytes.len().div_ceil(249).max(1));
    let wire = frames.concat();
    let mut reader = LinkReader::new();
    let mut reassembler = Reassembler::new(65536);
    let mut out = None;
    for piece in wire.chunks(chunk) {
        reader.push(piece);
        while let Some(frame) = reader.next_frame() {
            prop_assert_eq!((frame.destination, frame.source), (dst, src));
            prop_assert_eq!(frame.control, control);
            let seg = TransportSegment::decode(&frame.user_data).map_err(|e| TestCaseError::fail(e.to_string()))?;
            if let Some(done) = reassembler.push(&seg).map_err(|e| TestCaseError::fail(e.to_string()))? {
                prop_assert!(out.is_none(), "second fragment from one message");
                out = Some(done);
            }
        }
    }
    let done = out.ok_or_else(|| TestCaseError::fail("fragment never completed"))?;
    prop_assert_eq!(&done, &bytes);
    let back = decode_app_fragment(&done).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(&back, frag);
    for frame in &frames {
        let decoded = decode_link_frame(frame).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(decoded.consumed, frame.len());
        prop_assert_eq!(decoded.skipped, 0);
    }
    Ok(())
}

fn round_trips() -> Result<(u32, usize), String> {
    let config = Config {
        cases: ROUND_TRIPS,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let seen = RefCell::new(BTreeSet::new());
    let count = RefCell::new(0u32);
    runner
        .run(&(fragment(), 1usize..300, 0u8..64), |(frag, chunk, seq)| {
            *count.borrow_mut() += 1;
            seen.borrow_mut().extend(frag.objects.iter().map(|b| b.variation.group_var()));
            through_stack(&frag, chunk, seq)
        })
        .map_err(|e| format!("round trip: {e}"))?;
    let seen = seen.into_inner();
    let missing: Vec<_> = Variation::all()
        .iter()
        .filter(|v| !seen.contains(&v.group_var()))
        .map(|v| format!("g{}v{}", v.group_var().0, v.group_var().1))
        .collect();
    ensure!(missing.is_empty(), "variations never generated: {}", missing.join(" "));
    let count = count.into_inner();
    ensure!(count >= ROUND_TRIPS, "only {count} round trips ran");
    Ok((count, seen.len()))
}

fn crc_blocks() -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(0x3D65);
    for n in 0..CRC_BLOCKS {
        let len = rng.gen_range(1..=64);
        let block: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let crc = crc_dnp(&block);
        ensure!(crc == crc_bit_serial(&block), "block {n} {block:02X?}: {crc:04X} vs oracle");
        let mut framed = block;
        framed.extend_from_slice(&crc.to_le_bytes());
        ensure!(verify_block(&framed), "block {n} fails verification with its own CRC");
        *framed.last_mut().expect("crc octet") ^= 1 << rng.gen_range(0..8);
        ensure!(!verify_block(&framed), "block {n} verifies with a flipped CRC bit");
    }
    Ok(CRC_BLOCKS)
}

/// Random octets, mutated valid messages and truncations into every decode path.
fn fuzz() -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(1815);
    let mut seeds: Vec<Vec<u8>> = Vec::new();
    let mut runner = TestRunner::new_with_rng(Config::default(), TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let strategy = fragment();
    while seeds.len() < 256 {
        let frag = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        seeds.push(encode_app_fragment(&frag).map_err(|e| e.to_string())?);
    }
    let mut reader = LinkReader::new();
    let mut reassembler = Reassembler::new(4096);
    let mut crashes = 0usize;
    let mut first = None;
    let prev = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    for case in 0..FUZZ_CASES {
        let input: Vec<u8> = match case % 3 {
            0 => {
                let len = rng.gen_range(0..300);
                let mut v: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
                if len > 2 && case % 2 == 0 {
                    let at = rng.gen_range(0..len - 1);
                    v[at] = 0x05;
                    v[at + 1] = 0x64;
                }
                v
            }
            1 => {
                let mut v = seeds[rng.gen_range(0..seeds.len())].clone();
                for _ in 0..rng.gen_range(1..6) {
                    if v.is_empty() {
                        break;
                    }
                    let at = rng.gen_range(0..v.len());
                    v[at] = rng.gen();
                }
                v
            }
            _ => {
                let v = &seeds[rng.gen_range(0..seeds.len())];
                let cut = rng.gen_range(0..=v.len());
                let frames = fragment_frames(
                    &decode_app_fragment(v).expect("seed decodes"),
                    LinkControl::master_data(),
                    560,
                    1,
                    0,
                )
                .expect("seed encodes")
                .concat();
                let mut w = v[..cut].to_vec();
                let fc = rng.gen_range(0..=frames.len());
                w.extend_from_slice(&frames[..fc]);
                w
            }
        };
        let result = catch_unwind(AssertUnwindSafe(|| {
            let _ = decode_app_fragment(&input);
            let _ = decode_link_frame(&input);
            if let Ok(seg) = TransportSegment::decode(&input) {
                let _ = reassembler.push(&seg);
            }
            reader.push(&input);
            while reader.next_frame().is_some() {}
            let _ = dump_capture(&String::from_utf8_lossy(&input));
        }));
        if result.is_err() {
            crashes += 1;
            first.get_or_insert_with(|| format!("{input:02X?}"));
            reader = LinkReader::new();
            reassembler = Reassembler::new(4096);
        }
    }
    std::panic::set_hook(prev);
    ensure!(crashes == 0, "{crashes} fuzz inputs crashed, first {}", first.unwrap_or_default());
    Ok(FUZZ_CASES)
}
