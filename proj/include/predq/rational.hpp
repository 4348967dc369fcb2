#pragma once

#include <gmpxx.h>

#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <type_traits>

namespace predq {

using Rational = mpq_class;

template <class S>
inline constexpr bool is_exact_v = std::is_same_v<S, Rational>;

/// Parses "n/d", an integer, or a decimal literal such as "0.25" or "1e-3"
/// into an exact rational. Throws std::invalid_argument on malformed input.
inline Rational parse_rational(std::string_view text) {
    auto fail = [&]() -> Rational {
        throw std::invalid_argument("malformed number '" + std::string(text) + "'");
    };
    if (text.empty()) return fail();

    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        auto is_int = [](std::string_view s) {
            if (s.empty()) return false;
            std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
            if (i == s.size()) return false;
            for (; i < s.size(); ++i)
                if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
            return true;
        };
        auto num = text.substr(0, slash);
        auto den = text.substr(slash + 1);
        if (!is_int(num) || !is_int(den) || den[0] == '-' || den[0] == '+') return fail();
        mpz_class n(std::string(num[0] == '+' ? num.substr(1) : num), 10);
        mpz_class d(std::string(den), 10);
        if (d == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
        Rational r(n, d);
        r.canonicalize();
        return r;
    }

    // decimal: [sign] digits [. digits] [(e|E) [sign] digits]
    std::size_t i = 0;
    bool negative = false;
    if (text[i] == '+' || text[i] == '-') negative = text[i++] == '-';
    std::string digits;
    long exponent = 0;
    bool any = false;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
        digits.push_back(text[i++]);
        any = true;
    }
    if (i < text.size() && text[i] == '.') {
        ++i;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
            digits.push_back(text[i++]);
            --exponent;
            any = true;
        }
    }
    if (!any) return fail();
    if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        ++i;
        long e = 0;
        auto [ptr, ec] = std::from_chars(text.data() + i + (i < text.size() && text[i] == '+' ? 1 : 0),
                                         text.data() + text.size(), e);
        if (ec != std::errc() || ptr != text.data() + text.size()) return fail();
        exponent += e;
        i = text.size();
    }
    if (i != text.size()) return fail();
    if (exponent > 4096 || exponent < -4096) return fail();

    mpz_class mantissa(digits, 10);
    mpz_class scale;
    mpz_ui_pow_ui(scale.get_mpz_t(), 10, static_cast<unsigned long>(exponent < 0 ? -exponent : exponent));
    Rational r = exponent < 0 ? Rational(mantissa, scale) : Rational(mantissa * scale, 1);
    r.canonicalize();
    return negative ? Rational(-r) : r;
}

/// Exact rational for a binary64 value read from a JSON number literal. The
/// shortest round-trip decimal is used, so a literal such as 0.1 becomes 1/10
/// rather than the nearest binary fraction.
inline Rational rational_from_literal(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("non-finite number");
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw std::invalid_argument("unrepresentable number");
    return parse_rational(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
}

/// "n/d", or "n" for integers.
inline std::string to_string(Rational const& r) {
    if (r.get_den() == 1) return r.get_num().get_str();
    return r.get_str();
}

inline double to_double(Rational const& r) { return r.get_d(); }
inline double to_double(double d) { return d; }

template <class S>
S convert(Rational const& r) {
    if constexpr (is_exact_v<S>) {
        return r;
    } else {
        return static_cast<S>(r.get_d());
    }
}

/// Exact value of a finite double.
inline Rational exact_from_double(double d) {
    Rational r(d);
    r.canonicalize();
    return r;
}

template <class S>
bool is_zero(S const& v) {
    return v == 0;
}

template <class S>
S zero() {
    return S(0);
}

template <class S>
S one() {
    return S(1);
}

}  // namespace predq
