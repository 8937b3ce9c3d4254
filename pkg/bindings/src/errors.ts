/** Errors surfaced by the bindings, carrying the toolkit's error name. */

/**
 * A failure reported by the vkt toolkit. `name` is the stable error
 * identifier from the CLI (`RangeOutOfBounds`, `BadMagic`, ...), so
 * callers can branch on it across the process boundary.
 */
export class VktError extends Error {
  constructor(name: string, message: string) {
    super(message);
    this.name = name;
  }
}

/** The CLI rejected the invocation itself (exit code 1). */
export class VktUsageError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "VktUsageError";
  }
}
