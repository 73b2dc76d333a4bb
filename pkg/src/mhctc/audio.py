"""Synthetic waveform corpus with controllable additive-noise mismatch.

Each alphabet symbol is rendered as a pair of sinusoids at symbol-specific
band centers under a Hann amplitude envelope; utterances concatenate the
symbols of a random transcription.  Noise (wideband babble-like or
band-limited) is mixed at an exact target SNR.
"""

import json
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .alphabet import LabelAlphabet
from .errors import ConfigError, InvalidInput

NOISE_KINDS = ("none", "white", "babble", "bandlimited")


@dataclass(frozen=True)
class SynthConfig:
    alphabet: LabelAlphabet
    sample_rate: int = 8000
    symbol_ms: tuple = (80, 140)
    noise_kind: str = "none"
    snr_db: float = 10.0
    snr_spread_db: float = 0.0  # per-utterance SNR = snr_db +/- spread
    freq_jitter: float = 0.0  # relative band-center jitter per symbol instance
    amp_jitter: float = 0.0  # relative amplitude jitter per symbol instance
    seed: int = 0

    def __post_init__(self):
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigError(f"noise_kind must be one of {NOISE_KINDS}")


@dataclass
class Utterance:
    id: str
    waveform: np.ndarray
    labels: tuple
    sample_rate: int
    condition: str
    signal_power: float = 0.0
    noise_power: float = 0.0


def symbol_band_centers(alphabet, sample_rate=8000):
    """(low, high) formant-like center pair per symbol, >=200 Hz apart."""
    n = alphabet.n_symbols
    lo0, hi0 = 500.0, 1900.0
    step = max(250.0, (1400.0 / max(n, 1)))
    centers = []
    for i in range(n):
        f1 = lo0 + i * step
        f2 = hi0 + i * step
        if f2 >= sample_rate / 2:
            raise ConfigError("alphabet too large for the sample rate")
        centers.append((f1, f2))
    return centers


def _render_symbol(f1, f2, n_samples, sample_rate):
    t = np.arange(n_samples) / sample_rate
    env = np.hanning(n_samples)
    return env * 0.45 * (np.sin(2 * np.pi * f1 * t) + np.sin(2 * np.pi * f2 * t))


def render_signal(cfg, labels, rng):
    """Concatenated symbol tones for one transcription."""
    centers = symbol_band_centers(cfg.alphabet, cfg.sample_rate)
    lo, hi = cfg.symbol_ms
    pieces = []
    for lab in labels:
        ms = rng.uniform(lo, hi)
        n = max(8, int(round(ms * cfg.sample_rate / 1000.0)))
        f1, f2 = centers[lab - 1]
        if cfg.freq_jitter > 0.0:
            f1 *= rng.uniform(1.0 - cfg.freq_jitter, 1.0 + cfg.freq_jitter)
            f2 *= rng.uniform(1.0 - cfg.freq_jitter, 1.0 + cfg.freq_jitter)
        piece = _render_symbol(f1, f2, n, cfg.sample_rate)
        if cfg.amp_jitter > 0.0:
            piece = piece * rng.uniform(1.0 - cfg.amp_jitter, 1.0)
        pieces.append(piece)
    if not pieces:
        pieces = [np.zeros(int(0.1 * cfg.sample_rate))]
    return np.concatenate(pieces)


def make_noise(kind, n_samples, sample_rate, rng):
    """Unit-scale noise of the requested kind."""
    white = rng.standard_normal(n_samples)
    if kind == "white":
        return white
    if kind == "babble":
        # wideband, low-frequency weighted and slowly amplitude-modulated,
        # crudely speech-shaped
        spec = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n_samples, 1.0 / sample_rate)
        spec *= 1.0 / np.sqrt(1.0 + (freqs / 800.0) ** 2)
        shaped = np.fft.irfft(spec, n_samples)
        t = np.arange(n_samples) / sample_rate
        rate = rng.uniform(2.0, 6.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        envelope = 0.3 + 0.7 * 0.5 * (1.0 + np.sin(2 * np.pi * rate * t + phase))
        return shaped * envelope
    if kind == "bandlimited":
        spec = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n_samples, 1.0 / sample_rate)
        spec[(freqs < 700.0) | (freqs > 2600.0)] = 0.0
        return np.fft.irfft(spec, n_samples)
    raise ConfigError(f"unknown noise kind {kind!r}")


def mix_at_snr(signal, noise, snr_db):
    """Scale ``noise`` so that 10*log10(Ps/Pn) equals ``snr_db`` exactly."""
    ps = float(np.mean(signal**2))
    pn = float(np.mean(noise**2))
    if pn <= 0.0:
        raise InvalidInput("noise has zero power")
    scale = np.sqrt(ps / (pn * 10.0 ** (snr_db / 10.0)))
    scaled = noise * scale
    return signal + scaled, ps, float(np.mean(scaled**2))


def synth_utterance(cfg, uid, length, seed_seq):
    rng = np.random.default_rng(seed_seq)
    labels = tuple(int(i) for i in rng.integers(1, cfg.alphabet.n_symbols + 1, length))
    signal = render_signal(cfg, labels, rng)
    if cfg.noise_kind == "none":
        wavef = signal
        condition = "clean"
        ps, pn = float(np.mean(signal**2)), 0.0
    else:
        noise = make_noise(cfg.noise_kind, signal.size, cfg.sample_rate, rng)
        snr = cfg.snr_db
        if cfg.snr_spread_db > 0.0:
            snr += rng.uniform(-cfg.snr_spread_db, cfg.snr_spread_db)
        wavef, ps, pn = mix_at_snr(signal, noise, snr)
        condition = f"noisy@{cfg.snr_db:g}dB"
    peak = float(np.max(np.abs(wavef)))
    if peak > 1.0:
        wavef = wavef / peak  # scales signal and noise equally; SNR preserved
    return Utterance(
        id=uid,
        waveform=wavef,
        labels=labels,
        sample_rate=cfg.sample_rate,
        condition=condition,
        signal_power=ps,
        noise_power=pn,
    )


def synth_corpus(cfg, n_utts, len_range=(4, 10), id_prefix="utt"):
    """Deterministic corpus: per-utterance seeds spawned from cfg.seed."""
    lmin, lmax = len_range
    if lmin < 1:
        raise ConfigError("minimum transcription length is 1")
    root = np.random.SeedSequence(cfg.seed)
    children = root.spawn(n_utts)
    # lengths drawn from a dedicated stream so they do not perturb rendering
    lengths = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xC0))).integers(
        lmin, lmax + 1, size=n_utts
    )
    return [
        synth_utterance(cfg, f"{id_prefix}{i:04d}", int(lengths[i]), children[i])
        for i in range(n_utts)
    ]


def save_corpus(corpus, alphabet, out_dir):
    """Write 16-bit PCM WAVs plus a JSON manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for u in corpus:
        wav_path = out / f"{u.id}.wav"
        pcm = np.clip(u.waveform, -1.0, 1.0)
        pcm = (pcm * 32767.0).astype("<i2")
        with wave.open(str(wav_path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(u.sample_rate)
            w.writeframes(pcm.tobytes())
        records.append(
            {
                "id": u.id,
                "transcription": alphabet.decode(u.labels),
                "condition": u.condition,
                "path": wav_path.name,
                "sample_rate": u.sample_rate,
            }
        )
    manifest = {"alphabet": list(alphabet.symbols), "utterances": records}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out / "manifest.json"


def load_corpus(manifest_path):
    """Read a manifest written by save_corpus."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    alphabet = LabelAlphabet(tuple(manifest["alphabet"]))
    corpus = []
    for rec in manifest["utterances"]:
        with wave.open(str(manifest_path.parent / rec["path"]), "rb") as w:
            n = w.getnframes()
            pcm = np.frombuffer(w.readframes(n), dtype="<i2")
        corpus.append(
            Utterance(
                id=rec["id"],
                waveform=pcm.astype(np.float64) / 32767.0,
                labels=alphabet.encode(rec["transcription"]),
                sample_rate=rec["sample_rate"],
                condition=rec["condition"],
            )
        )
    return corpus, alphabet
