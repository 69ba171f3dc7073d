use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a random stream. Each (replication, role, class) triple gets
/// its own stream so that policies sharing a seed see the same arrivals and
/// service times regardless of the decisions they make.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Arrivals = 0,
    Service = 1,
    Thinning = 2,
    InitialLoad = 3,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(master_seed: u64, replication: u64, role: StreamRole, class: usize) -> ChaCha8Rng {
    let key = splitmix(master_seed ^ splitmix(replication.wrapping_add(1)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(((role as u64) << 32) | class as u64);
    rng
}
