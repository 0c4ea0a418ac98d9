//! Binary chain store.
//!
//! Layout: the 8-byte magic `ZIMCHN01`, a `u32` format version, the response
//! dimension, the site and species counts, then the draws, the acceptance
//! counters and optionally the final chain state (including the RNG position,
//! so a chain can be resumed). Integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{HeldOut, LatentState, Response, SpeciesParams};
use crate::samplers::{AcceptanceStats, ChainState, Draw, Rate};

pub const MAGIC: &[u8; 8] = b"ZIMCHN01";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainFile<R: Response> {
    pub n_sites: usize,
    pub n_species: usize,
    pub draws: Vec<Draw<R>>,
    pub acceptance: AcceptanceStats,
    pub final_state: Option<ChainState<R>>,
}

struct Enc<W: Write>(W);

impl<W: Write> Enc<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.0.write_all(b).map_err(Error::Io)
    }
    fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }
    fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn len(&mut self, v: usize) -> Result<()> {
        self.u64(v as u64)
    }
    fn f64s(&mut self, v: &[f64]) -> Result<()> {
        v.iter().try_for_each(|x| self.bytes(&x.to_le_bytes()))
    }

    fn theta<R: Response>(&mut self, theta: &[SpeciesParams<R>]) -> Result<()> {
        let mut buf = Vec::new();
        for p in theta {
            self.len(p.atoms.len())?;
            buf.clear();
            p.atoms.iter().for_each(|a| R::encode_atom(a, &mut buf));
            R::encode_shared(&p.shared, &mut buf);
            self.f64s(&buf)?;
        }
        Ok(())
    }

    fn latent(&mut self, l: &LatentState) -> Result<()> {
        let z: Vec<u8> = l.z.iter().map(|&b| u8::from(b)).collect();
        self.bytes(&z)?;
        self.f64s(&l.pi)?;
        self.f64s(&l.lambda)?;
        match &l.heldout {
            None => self.u8(0),
            Some(h) => {
                self.u8(1)?;
                self.len(h.site)?;
                self.len(h.x.len())?;
                self.f64s(&h.x)
            }
        }
    }

    fn rates(&mut self, v: &[Rate]) -> Result<()> {
        self.len(v.len())?;
        v.iter().try_for_each(|r| {
            self.u64(r.accepted)?;
            self.u64(r.proposed)
        })
    }
}

struct Dec<Rd: Read>(Rd);

impl<Rd: Read> Dec<Rd> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Store("truncated file".into()),
            _ => Error::Io(e),
        })?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    /// A length, bounded to catch corrupt input before allocating.
    fn len(&mut self, max: usize) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).ok().filter(|&v| v <= max).ok_or_else(|| Error::Store(format!("implausible length {v}")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Store(format!("bad flag byte {v}"))),
        }
    }

    fn theta<R: Response>(&mut self, m: usize) -> Result<Vec<SpeciesParams<R>>> {
        (0..m)
            .map(|_| {
                let a = self.len(1 << 20)?;
                let slots = self.f64s(a * R::ATOM_LEN + R::SHARED_LEN)?;
                let atoms = slots[..a * R::ATOM_LEN].chunks(R::ATOM_LEN).map(R::decode_atom).collect();
                let shared = R::decode_shared(&slots[a * R::ATOM_LEN..]);
                Ok(SpeciesParams { atoms, shared })
            })
            .collect()
    }

    fn latent(&mut self, n: usize, m: usize) -> Result<LatentState> {
        let z = (0..n * m).map(|_| self.flag()).collect::<Result<Vec<_>>>()?;
        let pi = self.f64s(n * m)?;
        let lambda = self.f64s(n * m)?;
        let heldout = if self.flag()? {
            let site = self.len(n)?;
            let d = self.len(2)?;
            Some(HeldOut { site, x: self.f64s(d)? })
        } else {
            None
        };
        LatentState::new(n, m, z, pi, lambda, heldout)
    }

    fn rates(&mut self) -> Result<Vec<Rate>> {
        let k = self.len(1 << 32)?;
        (0..k).map(|_| Ok(Rate { accepted: self.u64()?, proposed: self.u64()? })).collect()
    }
}

fn write_state<R: Response, W: Write>(e: &mut Enc<W>, s: &ChainState<R>) -> Result<()> {
    e.u64(s.iteration)?;
    e.theta(&s.theta)?;
    e.latent(&s.latent)?;
    e.bytes(&s.rng.get_seed())?;
    e.u64(s.rng.get_stream())?;
    e.bytes(&s.rng.get_word_pos().to_le_bytes())
}

fn read_state<R: Response, Rd: Read>(d: &mut Dec<Rd>, n: usize, m: usize) -> Result<ChainState<R>> {
    let iteration = d.u64()?;
    let theta = d.theta(m)?;
    let latent = d.latent(n, m)?;
    let mut rng = ChaCha8Rng::from_seed(d.bytes::<32>()?);
    rng.set_stream(d.u64()?);
    rng.set_word_pos(u128::from_le_bytes(d.bytes::<16>()?));
    Ok(ChainState { theta, latent, iteration, rng })
}

pub fn write_chain<R: Response, W: Write>(out: W, file: &ChainFile<R>) -> Result<()> {
    let mut e = Enc(out);
    e.bytes(MAGIC)?;
    e.u32(VERSION)?;
    e.u32(R::DIM as u32)?;
    e.len(file.n_sites)?;
    e.len(file.n_species)?;
    e.len(file.draws.len())?;
    for draw in &file.draws {
        e.u64(draw.iteration)?;
        e.theta(&draw.theta)?;
        e.latent(&draw.latent)?;
    }
    let a = &file.acceptance;
    for v in [&a.lambda, &a.atom_mh, &a.atom_block, &a.sigma, &a.x] {
        e.rates(v)?;
    }
    match &file.final_state {
        None => e.u8(0)?,
        Some(s) => {
            e.u8(1)?;
            write_state(&mut e, s)?;
        }
    }
    e.0.flush()?;
    Ok(())
}

pub fn read_chain<R: Response, Rd: Read>(input: Rd) -> Result<ChainFile<R>> {
    let mut d = Dec(input);
    if &d.bytes::<8>()? != MAGIC {
        return Err(Error::Store("not a chain store (bad magic)".into()));
    }
    let version = d.u32()?;
    if version != VERSION {
        return Err(Error::Store(format!("unsupported format version {version}")));
    }
    let dim = d.u32()?;
    if dim as usize != R::DIM {
        return Err(Error::Store(format!("store holds a {dim}-D chain, expected {}-D", R::DIM)));
    }
    let n = d.len(1 << 24)?;
    let m = d.len(1 << 24)?;
    let count = d.len(1 << 40)?;
    let mut draws = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let iteration = d.u64()?;
        let theta = d.theta(m)?;
        let latent = d.latent(n, m)?;
        draws.push(Draw { iteration, theta, latent });
    }
    let acceptance = AcceptanceStats {
        lambda: d.rates()?,
        atom_mh: d.rates()?,
        atom_block: d.rates()?,
        sigma: d.rates()?,
        x: d.rates()?,
    };
    let final_state = if d.flag()? { Some(read_state(&mut d, n, m)?) } else { None };
    Ok(ChainFile { n_sites: n, n_species: m, draws, acceptance, final_state })
}

pub fn save_chain<R: Response>(path: &Path, file: &ChainFile<R>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_chain(BufWriter::new(File::create(path)?), file)
}

pub fn load_chain<R: Response>(path: &Path) -> Result<ChainFile<R>> {
    let f = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    read_chain(BufReader::new(f))
}

/// Reads only the dimension field, to pick the response type before decoding.
pub fn peek_dim(path: &Path) -> Result<usize> {
    let mut f = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
        _ => Error::Io(e),
    })?;
    let mut head = [0u8; 16];
    f.read_exact(&mut head).map_err(|_| Error::Store("truncated file".into()))?;
    if &head[..8] != MAGIC {
        return Err(Error::Store("not a chain store (bad magic)".into()));
    }
    Ok(u32::from_le_bytes(head[12..16].try_into().expect("4 bytes")) as usize)
}
