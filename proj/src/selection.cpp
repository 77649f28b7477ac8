// Copyright (c) 2026 The tsa authors
// SPDX-License-Identifier: Apache-2.0

#include "tsa/selection.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace tsa {

void validate(const TokenSelection& sel, int seq_len) {
    const int min_keep = std::max<int>(1, static_cast<int>(sel.forced.size()));
    if (sel.k_keep < min_keep || sel.k_keep > seq_len) {
        throw std::invalid_argument("validate: k_keep " + std::to_string(sel.k_keep) +
                                    " outside [" + std::to_string(min_keep) + ", " +
                                    std::to_string(seq_len) + "]");
    }
    for (size_t h = 0; h < sel.indices.size(); ++h) {
        const IndexList& s = sel.indices[h];
        if (static_cast<int>(s.size()) != sel.k_keep) {
            throw std::invalid_argument("validate: head " + std::to_string(h) + " keeps " +
                                        std::to_string(s.size()) + " tokens, expected " +
                                        std::to_string(sel.k_keep));
        }
        for (size_t r = 0; r < s.size(); ++r) {
            if (s[r] < 0 || s[r] >= seq_len) {
                throw std::invalid_argument("validate: head " + std::to_string(h) + " index " +
                                            std::to_string(s[r]) + " out of range [0, " +
                                            std::to_string(seq_len) + ")");
            }
            if (r > 0 && s[r] <= s[r - 1]) {
                throw std::invalid_argument("validate: head " + std::to_string(h) +
                                            " indices not strictly ascending at position " +
                                            std::to_string(r));
            }
        }
        for (int f : sel.forced) {
            if (!std::binary_search(s.begin(), s.end(), f)) {
                throw std::invalid_argument("validate: head " + std::to_string(h) +
                                            " is missing forced index " + std::to_string(f));
            }
        }
    }
}

}  // namespace tsa
