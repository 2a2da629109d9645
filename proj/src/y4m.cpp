#include "vannot/y4m.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vannot/errors.hpp"

namespace vannot {

namespace {

constexpr std::string_view kSignature = "YUV4MPEG2";
constexpr std::size_t kMaxHeaderLine = 4096;

struct Header {
  int width = -1;
  int height = -1;
  Rational rate{0, 0};
  ChromaMode chroma = ChromaMode::k420;
};

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const std::size_t next = line.find(' ', pos);
    const std::size_t end = next == std::string_view::npos ? line.size() : next;
    if (end > pos) tokens.push_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  return tokens;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void bad_token(std::string_view token, std::string_view why) {
  throw FormatError("y4m: bad header token '" + std::string(token) + "': " + std::string(why));
}

bool read_line(std::istream& in, std::string& line) {
  line.clear();
  char c;
  while (in.get(c)) {
    if (c == '\n') return true;
    line.push_back(c);
    if (line.size() > kMaxHeaderLine) throw FormatError("y4m: header line too long");
  }
  return !line.empty();
}

Header parse_header(std::string_view line) {
  const auto tokens = split_spaces(line);
  if (tokens.empty() || tokens[0] != kSignature) {
    bad_token(tokens.empty() ? std::string_view{} : tokens[0], "missing YUV4MPEG2 signature");
  }
  Header h;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const std::string_view tok = tokens[i];
    const std::string_view val = tok.substr(1);
    switch (tok[0]) {
      case 'W':
        if (!parse_int(val, h.width) || h.width <= 0) bad_token(tok, "width");
        break;
      case 'H':
        if (!parse_int(val, h.height) || h.height <= 0) bad_token(tok, "height");
        break;
      case 'F': {
        const auto colon = val.find(':');
        if (colon == std::string_view::npos || !parse_int(val.substr(0, colon), h.rate.num) ||
            !parse_int(val.substr(colon + 1), h.rate.den) || h.rate.num == 0 ||
            h.rate.den == 0) {
          bad_token(tok, "frame rate");
        }
        break;
      }
      case 'C':
        if (val == "420jpeg" || val == "420paldv" || val == "420mpeg2" || val == "420") {
          h.chroma = ChromaMode::k420;
        } else if (val == "mono") {
          h.chroma = ChromaMode::kMono;
        } else {
          bad_token(tok, "unsupported chroma format");
        }
        break;
      case 'I':
        if (val != "p" && val != "?") bad_token(tok, "only progressive input is supported");
        break;
      case 'A':
      case 'X':
        break;
      default:
        bad_token(tok, "unknown tag");
    }
  }
  if (h.width < 0) throw FormatError("y4m: header lacks W");
  if (h.height < 0) throw FormatError("y4m: header lacks H");
  if (h.rate.num == 0) throw FormatError("y4m: header lacks F");
  return h;
}

void read_plane(std::istream& in, Plane& plane, long frame) {
  in.read(reinterpret_cast<char*>(plane.data()), static_cast<std::streamsize>(plane.size()));
  if (static_cast<std::size_t>(in.gcount()) != plane.size()) {
    throw TruncationError("y4m: truncated payload in frame " + std::to_string(frame), frame);
  }
}

void write_plane(std::ostream& out, const Plane& plane, int w, int h) {
  for (int y = 0; y < h; ++y) {
    out.write(reinterpret_cast<const char*>(plane.row(y).data()), w);
  }
}

}  // namespace

FrameSequence load_y4m(std::istream& in) {
  std::string line;
  if (!read_line(in, line)) throw FormatError("y4m: empty stream");
  const Header h = parse_header(line);

  const int cw = (h.width + 1) / 2;
  const int ch = (h.height + 1) / 2;
  std::vector<FrameBuffer> frames;
  for (long index = 0;; ++index) {
    if (in.peek() == std::char_traits<char>::eof()) break;
    if (!read_line(in, line)) break;
    if (line.rfind("FRAME", 0) != 0) {
      throw FormatError("y4m: expected FRAME marker before frame " + std::to_string(index));
    }
    FrameBuffer f;
    f.index = static_cast<int>(index);
    f.luma = Plane(h.width, h.height);
    read_plane(in, f.luma, index);
    if (h.chroma == ChromaMode::k420) {
      f.chroma_u = Plane(cw, ch);
      f.chroma_v = Plane(cw, ch);
      read_plane(in, *f.chroma_u, index);
      read_plane(in, *f.chroma_v, index);
    }
    frames.push_back(std::move(f));
  }
  return make_sequence(h.width, h.height, h.rate, h.chroma, std::move(frames));
}

FrameSequence load_y4m_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_y4m(in);
}

std::size_t write_y4m(const FrameSequence& seq, std::ostream& out) {
  if (seq.frames.empty()) throw ArgumentError("y4m: cannot write an empty sequence");
  std::ostringstream header;
  header << kSignature << " W" << seq.orig_width << " H" << seq.orig_height << " F"
         << seq.frame_rate.num << ':' << seq.frame_rate.den << " Ip C"
         << (seq.chroma == ChromaMode::kMono ? "mono" : "420jpeg") << '\n';
  const std::string hdr = header.str();
  out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));

  const int cw = (seq.orig_width + 1) / 2;
  const int ch = (seq.orig_height + 1) / 2;
  std::size_t bytes = hdr.size();
  for (const auto& f : seq.frames) {
    out.write("FRAME\n", 6);
    write_plane(out, f.luma, seq.orig_width, seq.orig_height);
    bytes += 6 + static_cast<std::size_t>(seq.orig_width) * seq.orig_height;
    if (seq.chroma == ChromaMode::k420) {
      write_plane(out, *f.chroma_u, cw, ch);
      write_plane(out, *f.chroma_v, cw, ch);
      bytes += 2 * static_cast<std::size_t>(cw) * ch;
    }
  }
  if (!out) throw IoError("y4m: write failed");
  return bytes;
}

std::size_t write_y4m_file(const FrameSequence& seq, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  const std::size_t n = write_y4m(seq, out);
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
  return n;
}

}  // namespace vannot
