import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    globals: true,
    // integration tests spawn the review service and wait for readiness
    testTimeout: 30_000,
    hookTimeout: 30_000,
  },
});
