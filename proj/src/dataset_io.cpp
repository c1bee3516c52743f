#include <charconv>
#include <fstream>

#include "awp/dataset.hpp"
#include "awp/error.hpp"
#include "binio.hpp"

namespace awp {
namespace {

constexpr char kDatasetMagic[4] = {'A', 'W', 'P', 'D'};
constexpr uint16_t kDatasetVersion = 1;

bool parse_int(std::string_view s, int32_t& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

std::string unquote(std::string s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        std::string out;
        for (size_t i = 1; i + 1 < s.size(); ++i) {
            out.push_back(s[i]);
            if (s[i] == '"' && s[i + 1] == '"') ++i;
        }
        return out;
    }
    return s;
}

}  // namespace

std::vector<LabeledText> read_text_csv(const std::filesystem::path& path, int num_classes) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<LabeledText> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected \"label,text\"");
        }
        int32_t label = 0;
        if (!parse_int(std::string_view(line).substr(0, comma), label)) {
            if (lineno == 1) continue;  // header
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": label '" + line.substr(0, comma) +
                             "' is not an integer");
        }
        if (label < 0 || label >= num_classes) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": label " + std::to_string(label) +
                                  " outside [0," + std::to_string(num_classes) + ")");
        }
        rows.push_back(LabeledText{label, unquote(line.substr(comma + 1)), lineno});
    }
    return rows;
}

void write_text_csv(const std::filesystem::path& path, std::span<const LabeledText> rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "label,text\n";
    for (const auto& r : rows) out << r.label << ',' << r.text << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

Dataset encode_text(std::span<const LabeledText> rows, const VocabMap& vocab, int64_t max_len, int num_classes) {
    if (max_len < 1) throw ValidationError("max sequence length must be positive");
    Dataset d(DataKind::Text, Shape{max_len}, num_classes);
    Example x;
    x.kind = DataKind::Text;
    x.shape = Shape{max_len};
    for (const auto& r : rows) {
        x.tokens = vocab.encode(r.text, max_len);
        d.push_back(x, r.label);
    }
    return d;
}

Dataset load_text_csv(const std::filesystem::path& path, const VocabMap& vocab, int64_t max_len, int num_classes) {
    auto rows = read_text_csv(path, num_classes);
    Dataset d = encode_text(rows, vocab, max_len, num_classes);
    d.id = path.filename().string();
    return d;
}

Dataset load_text_csv(const std::filesystem::path& path, int64_t max_len, int num_classes, VocabMap& vocab_out,
                      std::span<const std::string> extra) {
    auto rows = read_text_csv(path, num_classes);
    std::vector<std::string> texts;
    texts.reserve(rows.size());
    for (const auto& r : rows) texts.push_back(r.text);
    vocab_out = VocabMap::build(texts, extra);
    Dataset d = encode_text(rows, vocab_out, max_len, num_classes);
    d.id = path.filename().string();
    return d;
}

void save_dataset_bin(const Dataset& d, const std::filesystem::path& path) {
    binio::Writer w;
    w.bytes(kDatasetMagic, 4);
    w.put<uint16_t>(kDatasetVersion);
    w.put<uint8_t>(static_cast<uint8_t>(d.kind()));
    w.put<uint32_t>(static_cast<uint32_t>(d.size()));
    w.put<uint8_t>(static_cast<uint8_t>(d.example_shape().size()));
    for (auto dim : d.example_shape()) w.put<uint32_t>(static_cast<uint32_t>(dim));
    w.put<uint32_t>(static_cast<uint32_t>(d.num_classes()));
    for (size_t i = 0; i < d.size(); ++i) {
        if (d.kind() == DataKind::Image) {
            auto p = d.pixels(i);
            w.floats(p.data(), p.size());
        } else {
            // Token ids travel as floats; exact below 2^24.
            for (int32_t id : d.tokens(i)) w.put<float>(static_cast<float>(id));
        }
        w.put<uint32_t>(static_cast<uint32_t>(d.label(i)));
    }
    w.write_file(path);
}

Dataset load_dataset_bin(const std::filesystem::path& path) {
    const auto buf = binio::read_file(path);
    binio::Reader r(buf, path.string());
    char magic[4];
    r.take(magic, 4, "magic");
    if (std::memcmp(magic, kDatasetMagic, 4) != 0) throw FormatError(path.string() + ": not an AWPD dataset file");
    const auto version = r.get<uint16_t>("version");
    if (version != kDatasetVersion) {
        throw VersionError(path.string() + ": unsupported dataset version " + std::to_string(version));
    }
    const auto kind_byte = r.get<uint8_t>("kind");
    if (kind_byte > 1) throw FormatError(path.string() + ": unknown dataset kind " + std::to_string(kind_byte));
    const auto kind = static_cast<DataKind>(kind_byte);
    const auto count = r.get<uint32_t>("count");
    const auto rank = r.get<uint8_t>("rank");
    Shape shape;
    for (uint8_t i = 0; i < rank; ++i) shape.push_back(r.get<uint32_t>("dims"));
    const auto k = r.get<uint32_t>("class count");
    Dataset d(kind, shape, static_cast<int>(k));
    Example x;
    x.kind = kind;
    x.shape = shape;
    const auto es = static_cast<size_t>(shape_numel(shape));
    std::vector<float> raw(es);
    for (uint32_t i = 0; i < count; ++i) {
        r.take(raw.data(), es * sizeof(float), "example values");
        const auto label = r.get<uint32_t>("label");
        if (kind == DataKind::Image) {
            x.pixels = raw;
        } else {
            x.tokens.resize(es);
            for (size_t j = 0; j < es; ++j) x.tokens[j] = static_cast<int32_t>(raw[j]);
        }
        if (label >= k) {
            throw ValidationError(path.string() + ": example " + std::to_string(i) + " has label " +
                                  std::to_string(label) + " >= " + std::to_string(k));
        }
        d.push_back(x, static_cast<int32_t>(label));
    }
    if (!r.at_end()) throw FormatError(path.string() + ": trailing bytes after " + std::to_string(count) + " examples");
    d.id = path.filename().string();
    return d;
}

Dataset load_image_bin(const std::filesystem::path& path) {
    Dataset d = load_dataset_bin(path);
    if (d.kind() != DataKind::Image) throw ValidationError(path.string() + ": expected an image dataset");
    return d;
}

}  // namespace awp
