#pragma once

namespace kgs {

int max_threads();
void set_threads(int n);

}  // namespace kgs
