#ifndef RECORD_H
#define RECORD_H

#include <stddef.h>

struct record {
  char *name;
  long value;
};

size_t name_length(const char *line);
char *alloc_name_buffer(size_t len);
int parse_record(const char *line, struct record *out);
void free_record(struct record *r);

#endif
