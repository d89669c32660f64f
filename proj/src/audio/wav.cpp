#include <algorithm>
#include <cmath>
#include <cstring>
#include <string_view>

#include "omk/audio.hpp"
#include "omk/error.hpp"
#include "omk/io.hpp"

namespace omk::audio {

namespace {

std::uint16_t u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

constexpr std::string_view kMelMagic{"OMKMEL1\0", 8};
constexpr std::string_view kTokMagic{"OMKTOK1\0", 8};

std::string encode_matrix(std::string_view magic, std::size_t rows, std::size_t cols,
                          std::span<const float> values) {
  std::string out;
  out.reserve(16 + values.size() * 4);
  out.append(magic);
  io::put_u32le(out, static_cast<std::uint32_t>(rows));
  io::put_u32le(out, static_cast<std::uint32_t>(cols));
  for (float v : values) {
    io::put_f32le(out, v);
  }
  return out;
}

void decode_matrix(std::string_view magic, std::span<const unsigned char> bytes, std::size_t& rows,
                   std::size_t& cols, std::vector<float>& values) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), magic.data(), 8) != 0) {
    throw Error("binary matrix: bad magic");
  }
  rows = io::get_u32le(bytes.data() + 8);
  cols = io::get_u32le(bytes.data() + 12);
  if (bytes.size() != 16 + rows * cols * 4) {
    throw Error("binary matrix: size does not match header");
  }
  values.resize(rows * cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = io::get_f32le(bytes.data() + 16 + 4 * i);
  }
}

} // namespace

WaveformClip parse_wav(std::span<const unsigned char> b) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw Error("wav: not a RIFF/WAVE file");
  }
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const unsigned char* chunk = b.data() + pos;
    const std::uint32_t size = io::get_u32le(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > b.size()) {
      throw Error("wav: truncated chunk");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) {
        throw Error("wav: short fmt chunk");
      }
      format = u16le(b.data() + body);
      channels = u16le(b.data() + body + 2);
      rate = io::get_u32le(b.data() + body + 4);
      bits = u16le(b.data() + body + 14);
      if (format == 0xFFFE && size >= 26) { // WAVE_FORMAT_EXTENSIBLE: subformat GUID
        format = u16le(b.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) {
        throw Error("wav: data chunk before fmt chunk");
      }
      if (channels != 1) {
        throw Error("wav: only mono audio is supported");
      }
      WaveformClip clip;
      clip.sample_rate = static_cast<int>(rate);
      const unsigned char* data = b.data() + body;
      if (format == 1 && bits == 16) {
        clip.samples.resize(size / 2);
        for (std::size_t i = 0; i < clip.samples.size(); ++i) {
          const auto v = static_cast<std::int16_t>(u16le(data + 2 * i));
          clip.samples[i] = static_cast<float>(v) / 32768.0f;
        }
      } else if (format == 3 && bits == 32) {
        clip.samples.resize(size / 4);
        for (std::size_t i = 0; i < clip.samples.size(); ++i) {
          clip.samples[i] = io::get_f32le(data + 4 * i);
        }
      } else {
        throw Error("wav: unsupported encoding (need 16-bit PCM or 32-bit float)");
      }
      return clip;
    }
    pos = body + size + (size & 1u);
  }
  throw Error("wav: no data chunk");
}

WaveformClip read_wav(const std::filesystem::path& path) {
  const std::string bytes = io::read_text(path);
  try {
    return parse_wav({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string encode_wav(const WaveformClip& clip, bool as_float) {
  const std::uint16_t bits = as_float ? 32 : 16;
  const std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_size);
  out.append("RIFF");
  io::put_u32le(out, 36 + data_size);
  out.append("WAVE");
  out.append("fmt ");
  io::put_u32le(out, 16);
  put_u16le(out, as_float ? 3 : 1);
  put_u16le(out, 1);
  io::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate));
  io::put_u32le(out, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  put_u16le(out, bits / 8);
  put_u16le(out, bits);
  out.append("data");
  io::put_u32le(out, data_size);
  for (float s : clip.samples) {
    if (as_float) {
      io::put_f32le(out, s);
    } else {
      const double scaled = std::round(std::clamp(static_cast<double>(s), -1.0, 1.0) * 32767.0);
      put_u16le(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const WaveformClip& clip, bool as_float) {
  io::write_atomic(path, encode_wav(clip, as_float));
}

std::string encode_mel(const MelSpectrogram& mel) {
  return encode_matrix(kMelMagic, mel.n_frames, mel.n_bins, mel.values);
}

MelSpectrogram decode_mel(std::span<const unsigned char> bytes) {
  MelSpectrogram mel;
  decode_matrix(kMelMagic, bytes, mel.n_frames, mel.n_bins, mel.values);
  return mel;
}

std::string encode_tokens(const TokenGrid& grid) {
  return encode_matrix(kTokMagic, grid.n_tokens, grid.dim, grid.values);
}

TokenGrid decode_tokens(std::span<const unsigned char> bytes) {
  TokenGrid grid;
  decode_matrix(kTokMagic, bytes, grid.n_tokens, grid.dim, grid.values);
  return grid;
}

} // namespace omk::audio
