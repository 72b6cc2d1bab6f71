from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='BenchRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('case_name', models.CharField(db_index=True, max_length=100)),
                ('engine', models.CharField(max_length=20)),
                ('workers', models.IntegerField()),
                ('run', models.CharField(help_text="run index, or 'mean' for the aggregate row", max_length=10)),
                ('triangles', models.BigIntegerField(blank=True, help_text='empty when the run timed out', null=True)),
                ('elapsed_ms', models.FloatField(blank=True, help_text='engine time only, parsing excluded', null=True)),
                ('peak_mem_bytes', models.BigIntegerField(default=-1, help_text='peak resident set, -1 if unavailable')),
                ('timed_out', models.BooleanField(default=False)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at', 'id'],
            },
        ),
    ]
