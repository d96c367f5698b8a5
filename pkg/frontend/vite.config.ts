import { defineConfig } from 'vite';

// Built assets are served by the session harness under /app; in dev the
// socket and audio routes proxy to a locally running harness.
export default defineConfig({
  base: '/app/',
  server: {
    proxy: {
      '/ws': { target: 'ws://127.0.0.1:8765', ws: true },
      '/audio': { target: 'http://127.0.0.1:8765' },
    },
  },
});
