/* Compiles the public header as C and links the shared library. */
#include <stdio.h>

#include "pvqml/pvqml.h"

int main(void) {
  pvq_frame* f = NULL;
  size_t rows = 0, params = 0;
  if (pvq_frame_synth(2, 1, &f) != PVQ_OK) return 1;
  if (pvq_frame_rows(f, &rows) != PVQ_OK || rows != 48) return 1;
  pvq_frame_free(f);
  if (pvq_param_count(NULL, "hqnn", &params) != PVQ_OK || params != 2266) return 1;
  if (pvq_frame_load_csv(NULL, &f) != PVQ_ERR_NULL_ARGUMENT) return 1;
  printf("pvqml %s from C: %zu rows, %zu parameters\n", pvq_version(), rows, params);
  return 0;
}
