#include <cstdio>

int main() {
  std::puts("cadalign: placeholder");
  return 0;
}
