#include "ahd/phy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ahd/errors.hpp"

namespace ahd::phy {

const McsEntry& McsTable::lookup(std::size_t mcs_index) const {
    if (mcs_index >= entries.size())
        throw IndexOutOfRange("mcs_index out of table range");
    return entries[mcs_index];
}

McsTable McsTable::desk_default() {
    McsTable t;
    t.entries = {
        {2, 1.0 / 3.0}, {2, 0.5},       {4, 1.0 / 3.0}, {4, 0.5},
        {4, 2.0 / 3.0}, {16, 0.5},      {16, 2.0 / 3.0}, {16, 0.75},
    };
    return t;
}

McsTable McsTable::load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open MCS table: " + path);
    McsTable t;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream is(line);
        McsEntry e;
        std::size_t idx;
        if (is >> idx >> e.modulation_order >> e.code_rate) {
            if (t.entries.size() <= idx) t.entries.resize(idx + 1, McsEntry{});
            t.entries[idx] = e;
        }
    }
    return t;
}

TbLayout plan_tb(const Context& ctx, const tanner::CodeSpec& code, const PhyConfig& cfg) {
    const McsEntry& mcs = cfg.mcs.lookup(ctx.mcs_index);
    if (!std::isfinite(ctx.snr_db)) throw Error("non-finite snr_db");
    const std::size_t bits_per_sym = static_cast<std::size_t>(std::log2(mcs.modulation_order));
    const std::size_t channel_bits = ctx.n_prb * cfg.re_per_prb * bits_per_sym;
    const std::size_t k = code.k();
    if (k <= cfg.cb_crc.width + 1)
        throw InvalidSpec("code block too small to carry a CB CRC");
    const std::size_t cap = k - cfg.cb_crc.width;

    TbLayout lay;
    lay.modulation_order = mcs.modulation_order;
    lay.code_rate = mcs.code_rate;
    const long a = static_cast<long>(std::floor(static_cast<double>(channel_bits) * mcs.code_rate)) -
                   static_cast<long>(cfg.tb_crc.width);
    lay.payload_bits = static_cast<std::size_t>(std::max<long>(8, a));
    const std::size_t b = lay.payload_bits + cfg.tb_crc.width;
    lay.block_count = (b + cap - 1) / cap;
    lay.chunk_bits.assign(lay.block_count, b / lay.block_count);
    for (std::size_t i = 0; i < b % lay.block_count; ++i) ++lay.chunk_bits[i];
    std::size_t per_block = channel_bits / lay.block_count;
    per_block = std::max<std::size_t>(per_block, bits_per_sym);
    lay.channel_bits_per_block = ((per_block + bits_per_sym - 1) / bits_per_sym) * bits_per_sym;
    return lay;
}

// --- scrambling -----------------------------------------------------------

std::vector<Bit> gold_sequence(std::uint64_t seed, std::size_t length) {
    constexpr std::size_t kAdvance = 1600;
    const std::size_t total = length + kAdvance + 31;
    std::vector<Bit> x1(total), x2(total);
    x1[0] = 1;
    for (unsigned i = 0; i < 31; ++i) x2[i] = static_cast<Bit>((seed >> i) & 1);
    for (std::size_t n = 0; n + 31 < total; ++n) {
        x1[n + 31] = static_cast<Bit>(x1[n + 3] ^ x1[n]);
        x2[n + 31] = static_cast<Bit>(x2[n + 3] ^ x2[n + 2] ^ x2[n + 1] ^ x2[n]);
    }
    std::vector<Bit> c(length);
    for (std::size_t n = 0; n < length; ++n)
        c[n] = static_cast<Bit>(x1[n + kAdvance] ^ x2[n + kAdvance]);
    return c;
}

BitVec scramble_bits(const BitVec& bits, std::uint64_t seed) {
    const std::vector<Bit> seq = gold_sequence(seed, bits.size());
    BitVec out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) out[i] = bits[i] ^ seq[i];
    return out;
}

std::vector<double> descramble_llrs(const std::vector<double>& llrs, std::uint64_t seed) {
    const std::vector<Bit> seq = gold_sequence(seed, llrs.size());
    std::vector<double> out(llrs.size());
    for (std::size_t i = 0; i < llrs.size(); ++i) out[i] = seq[i] ? -llrs[i] : llrs[i];
    return out;
}

// --- rate matching --------------------------------------------------------

BitVec rate_match(const BitVec& codeword, const std::vector<std::size_t>& tx_positions,
                  std::size_t target_len) {
    if (tx_positions.empty()) throw LengthMismatch("empty transmit position set");
    BitVec out(target_len);
    for (std::size_t i = 0; i < target_len; ++i)
        out[i] = codeword.at(tx_positions[i % tx_positions.size()]);
    return out;
}

LlrFrame rate_dematch(const std::vector<double>& llrs,
                      const std::vector<std::size_t>& tx_positions, std::size_t n) {
    LlrFrame frame;
    frame.values.assign(n, 0.0);
    frame.origin.assign(n, Origin::Punctured);
    for (std::size_t i = 0; i < llrs.size(); ++i) {
        const std::size_t pos = tx_positions[i % tx_positions.size()];
        if (pos >= n) throw LengthMismatch("transmit position beyond codeword");
        frame.values[pos] += llrs[i];  // repeated observations accumulate
        frame.origin[pos] = Origin::Received;
    }
    return frame;
}

LlrFrame shortening_recover(LlrFrame frame, const std::vector<std::size_t>& filler_positions,
                            double llr_sat) {
    for (std::size_t pos : filler_positions) {
        if (pos >= frame.size()) throw IndexOutOfRange("filler position beyond codeword");
        frame.values[pos] = llr_sat;
        frame.origin[pos] = Origin::Shortened;
    }
    return frame;
}

// --- interleaving ---------------------------------------------------------

std::vector<std::size_t> block_interleaver_map(std::size_t length, std::size_t depth) {
    std::vector<std::size_t> map(length);
    if (depth <= 1 || length == 0) {
        for (std::size_t i = 0; i < length; ++i) map[i] = i;
        return map;
    }
    const std::size_t cols = (length + depth - 1) / depth;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < cols; ++c)
        for (std::size_t r = 0; r < depth; ++r) {
            const std::size_t idx = r * cols + c;
            if (idx < length) map[idx] = pos++;
        }
    return map;
}

// --- modulation / channel -------------------------------------------------

double noise_variance(double snr_db) {
    // Per-dimension variance for unit symbol energy.
    const double snr_lin = std::pow(10.0, snr_db / 10.0);
    return 1.0 / (2.0 * snr_lin);
}

std::vector<std::complex<double>> modulate(const BitVec& bits, std::size_t order) {
    const std::size_t bps = static_cast<std::size_t>(std::log2(order));
    if (order != 2 && order != 4 && order != 16) throw BadLength("unsupported modulation order");
    if (bits.size() % bps != 0) throw BadLength("bit count not divisible by bits/symbol");
    std::vector<std::complex<double>> out;
    out.reserve(bits.size() / bps);
    for (std::size_t i = 0; i < bits.size(); i += bps) {
        if (order == 2) {
            out.emplace_back(bits[i] ? -1.0 : 1.0, 0.0);
        } else if (order == 4) {
            const double s = 1.0 / std::sqrt(2.0);
            out.emplace_back((1 - 2 * bits[i]) * s, (1 - 2 * bits[i + 1]) * s);
        } else {
            const double s = 1.0 / std::sqrt(10.0);
            const double re = (1 - 2 * bits[i]) * (2 - (1 - 2 * bits[i + 2]));
            const double im = (1 - 2 * bits[i + 1]) * (2 - (1 - 2 * bits[i + 3]));
            out.emplace_back(re * s, im * s);
        }
    }
    return out;
}

std::vector<std::complex<double>> awgn(const std::vector<std::complex<double>>& symbols,
                                       double snr_db, std::uint64_t rng_seed) {
    const double sigma = std::sqrt(noise_variance(snr_db));
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> dist(0.0, sigma);
    std::vector<std::complex<double>> out;
    out.reserve(symbols.size());
    for (const auto& s : symbols) out.emplace_back(s.real() + dist(rng), s.imag() + dist(rng));
    return out;
}

std::vector<double> demap(const std::vector<std::complex<double>>& symbols, std::size_t order,
                          double noise_var) {
    if (noise_var <= 0.0) throw NonPositiveNoise("noise variance must be > 0");
    const std::size_t bps = static_cast<std::size_t>(std::log2(order));
    std::vector<double> out;
    out.reserve(symbols.size() * bps);

    if (order == 2) {
        for (const auto& y : symbols) out.push_back(2.0 * y.real() / noise_var);
        return out;
    }

    // Max-log over the Gray constellation; positive LLR means bit 0.
    std::vector<std::complex<double>> points;
    std::vector<BitVec> labels;
    for (std::size_t v = 0; v < order; ++v) {
        BitVec bits(bps);
        for (std::size_t b = 0; b < bps; ++b) bits[b] = static_cast<Bit>((v >> (bps - 1 - b)) & 1);
        points.push_back(modulate(bits, order)[0]);
        labels.push_back(bits);
    }
    for (const auto& y : symbols) {
        for (std::size_t b = 0; b < bps; ++b) {
            double d0 = 1e300, d1 = 1e300;
            for (std::size_t v = 0; v < order; ++v) {
                const double d = std::norm(y - points[v]);
                if (labels[v][b] == 0)
                    d0 = std::min(d0, d);
                else
                    d1 = std::min(d1, d);
            }
            out.push_back((d1 - d0) / (2.0 * noise_var));
        }
    }
    return out;
}

// --- end to end -----------------------------------------------------------

std::vector<TbInstance> run_link(const Context& ctx, std::size_t n_tbs, std::uint64_t seed,
                                 const tanner::TannerGraph& graph, const PhyConfig& cfg) {
    if (n_tbs == 0) throw Error("n_tbs must be >= 1");
    const tanner::CodeSpec& code = graph.spec;
    const TbLayout lay = plan_tb(ctx, code, cfg);
    const std::size_t n = code.n();
    const std::size_t k = code.k();
    const double nvar = noise_variance(ctx.snr_db);
    const auto imap = block_interleaver_map(lay.channel_bits_per_block, cfg.interleaver_depth);

    std::vector<TbInstance> tbs;
    tbs.reserve(n_tbs);
    for (std::size_t t = 0; t < n_tbs; ++t) {
        const std::uint64_t tb_seed = derive_seed(seed, t);
        std::mt19937_64 payload_rng(derive_seed(tb_seed, 0));

        TbInstance tb;
        tb.context = ctx;
        tb.payload = random_bits(lay.payload_bits, payload_rng);
        tb.payload_with_crc = crc_append(tb.payload, cfg.tb_crc);

        std::size_t off = 0;
        for (std::size_t cb = 0; cb < lay.block_count; ++cb) {
            const std::size_t chunk_len = lay.chunk_bits[cb];
            BitVec chunk(tb.payload_with_crc.begin() + static_cast<long>(off),
                         tb.payload_with_crc.begin() + static_cast<long>(off + chunk_len));
            off += chunk_len;

            CodeBlockInstance inst;
            inst.payload_bits = chunk_len;
            BitVec info = crc_append(chunk, cfg.cb_crc);
            for (std::size_t p = info.size(); p < k; ++p) inst.filler_positions.push_back(p);
            info.resize(k, 0);
            inst.tx_codeword = tanner::encode(graph, info);

            std::vector<std::size_t> tx_positions;
            tx_positions.reserve(n - inst.filler_positions.size());
            std::size_t fi = 0;
            for (std::size_t pos = 0; pos < n; ++pos) {
                if (fi < inst.filler_positions.size() && inst.filler_positions[fi] == pos) {
                    ++fi;
                    continue;
                }
                tx_positions.push_back(pos);
            }

            const std::uint64_t scr_seed = derive_seed(tb_seed, 2 * cb + 1) & 0x7fffffffULL;
            const std::uint64_t ch_seed = derive_seed(tb_seed, 2 * cb + 2);

            BitVec tx = rate_match(inst.tx_codeword, tx_positions, lay.channel_bits_per_block);
            tx = scramble_bits(tx, scr_seed);
            tx = apply_permutation(tx, imap);
            auto symbols = modulate(tx, lay.modulation_order);
            symbols = awgn(symbols, ctx.snr_db, ch_seed);
            std::vector<double> llrs = demap(symbols, lay.modulation_order, nvar);
            llrs = invert_permutation(llrs, imap);
            llrs = descramble_llrs(llrs, scr_seed);
            inst.llrs = rate_dematch(llrs, tx_positions, n);
            inst.llrs = shortening_recover(std::move(inst.llrs), inst.filler_positions, cfg.llr_sat);

            tb.blocks.push_back(std::move(inst));
        }
        tbs.push_back(std::move(tb));
    }
    return tbs;
}

} // namespace ahd::phy
